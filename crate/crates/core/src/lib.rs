//! Secret-key-rate estimation from dual-frequency GNSS carrier phase.
//!
//! Three receivers (alice, bob, eve) record UBX streams. For each
//! satellite the geometry-free phase combination is cut into aligned
//! 5-minute blocks, detrended, smoothed and normalized, and the pairwise
//! mutual information gives a per-block secret-key rate.
//!
//! The numerical stages ([`preprocess`], [`infotheory`], [`synth`]) are
//! generic over [`Real`]; aliases for `f64` and `f32` are provided here.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod infotheory;
pub mod observables;
pub mod preprocess;
pub mod scalar;
pub mod segmentation;
pub mod synth;
pub mod ubx;

pub use error::{Error, Result};
pub use scalar::Real;

pub type MiEstimate64 = infotheory::MiEstimate<f64>;
pub type MiEstimate32 = infotheory::MiEstimate<f32>;
pub type Ksg64 = infotheory::Ksg<f64>;
pub type Ksg32 = infotheory::Ksg<f32>;
pub type ProcessedSeries64 = preprocess::ProcessedSeries<f64>;
pub type ProcessedSeries32 = preprocess::ProcessedSeries<f32>;
pub type CascadeStages64 = preprocess::CascadeStages<f64>;

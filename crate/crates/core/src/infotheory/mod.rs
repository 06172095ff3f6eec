//! Mutual-information estimation and secret-key rates.

mod digamma;
mod ksg;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{preprocess_cascade, BlockRef, CascadeParams, ProcessedSeries};
use crate::scalar::Real;
use crate::segmentation::AlignedBlock;
use crate::ubx::{Role, SatelliteId};

pub use digamma::digamma;
pub use ksg::{ksg_mi, Ksg, MiEstimate, DEFAULT_K};

/// `I(A;B) − min(I(A;E), I(B;E))`. Negative when the eavesdropper learns
/// at least as much as the weaker legitimate link.
#[inline]
pub fn secret_key_rate<T: Real>(i_ab: T, i_ae: T, i_be: T) -> T {
    i_ab - i_ae.min(i_be)
}

/// Bits per second from a per-sample key rate, clamped at zero.
#[inline]
pub fn secure_bit_rate<T: Real>(r_sk: T, sample_rate: T) -> T {
    r_sk.max(T::zero()) * sample_rate
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    pub cascade: CascadeParams,
    pub k: usize,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            cascade: CascadeParams::default(),
            k: DEFAULT_K,
        }
    }
}

/// Per-block result.
#[derive(Debug, Clone, PartialEq)]
pub struct SkrRecord {
    pub sat: SatelliteId,
    pub start_epoch: f64,
    pub mean_elevation: Option<f64>,
    pub mean_azimuth: Option<f64>,
    pub i_ab: MiEstimate<f64>,
    pub i_ae: MiEstimate<f64>,
    pub i_be: MiEstimate<f64>,
    pub r_sk: f64,
}

impl SkrRecord {
    pub fn new(
        sat: SatelliteId,
        start_epoch: f64,
        geometry: Option<(f64, f64)>,
        i_ab: MiEstimate<f64>,
        i_ae: MiEstimate<f64>,
        i_be: MiEstimate<f64>,
    ) -> Self {
        SkrRecord {
            sat,
            start_epoch,
            mean_elevation: geometry.map(|g| g.0),
            mean_azimuth: geometry.map(|g| g.1),
            r_sk: secret_key_rate(i_ab.value_bits, i_ae.value_bits, i_be.value_bits),
            i_ab,
            i_ae,
            i_be,
        }
    }

    pub fn has_geometry(&self) -> bool {
        self.mean_elevation.is_some() && self.mean_azimuth.is_some()
    }
}

/// Runs the cascade on one role of a block in scalar type `T`.
///
/// The series is centred in `f64` first: raw geometry-free values carry
/// integer-ambiguity offsets far larger than the signal.
pub fn process_role<T: Real>(block: &AlignedBlock, role: Role, params: &CascadeParams) -> Result<ProcessedSeries<T>> {
    let raw = block.series(role);
    let m = raw.iter().sum::<f64>() / raw.len() as f64;
    let centred: Vec<T> = raw.iter().map(|v| T::of(v - m)).collect();
    let mut p = preprocess_cascade(&centred, params)
        .map_err(|e| Error::Degenerate(format!("{} {role} at {}: {e}", block.sat(), block.start_epoch())))?;
    p.source = Some(BlockRef {
        sat: block.sat(),
        start_epoch: block.start_epoch(),
    });
    Ok(p)
}

/// Cascade on all three roles, then pairwise KSG and the key rate.
pub fn evaluate_block_with<T: Real>(block: &AlignedBlock, params: &EvalParams, ksg: &Ksg<T>) -> Result<SkrRecord> {
    let a = process_role::<T>(block, Role::Alice, &params.cascade)?;
    let b = process_role::<T>(block, Role::Bob, &params.cascade)?;
    let e = process_role::<T>(block, Role::Eve, &params.cascade)?;
    let i_ab = ksg.estimate(&a.values, &b.values)?.to_f64();
    let i_ae = ksg.estimate(&a.values, &e.values)?.to_f64();
    let i_be = ksg.estimate(&b.values, &e.values)?.to_f64();
    let geometry = block.mean_elevation().zip(block.mean_azimuth());
    Ok(SkrRecord::new(block.sat(), block.start_epoch(), geometry, i_ab, i_ae, i_be))
}

pub fn evaluate_block<T: Real>(block: &AlignedBlock, params: &EvalParams) -> Result<SkrRecord> {
    evaluate_block_with(block, params, &Ksg::<T>::new(params.k))
}

pub const SKR_CSV_HEADER: [&str; 10] = [
    "sat", "start_epoch", "elev_deg", "azim_deg", "i_ab", "i_ae", "i_be", "r_sk", "k", "n",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `sat,start_epoch,elev_deg,azim_deg,i_ab,i_ae,i_be,r_sk,k,n`.
pub fn write_skr_csv<W: Write>(records: &[SkrRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SKR_CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.sat.to_string(),
            format!("{:.3}", r.start_epoch),
            opt(r.mean_elevation),
            opt(r.mean_azimuth),
            r.i_ab.value_bits.to_string(),
            r.i_ae.value_bits.to_string(),
            r.i_be.value_bits.to_string(),
            r.r_sk.to_string(),
            r.i_ab.k.to_string(),
            r.i_ab.n.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<skr csv>", e))?;
    Ok(())
}

#[derive(Deserialize)]
struct SkrRow {
    sat: SatelliteId,
    start_epoch: f64,
    elev_deg: Option<f64>,
    azim_deg: Option<f64>,
    i_ab: f64,
    i_ae: f64,
    i_be: f64,
    r_sk: f64,
    k: usize,
    n: usize,
}

/// Reads records written by [`write_skr_csv`]. The stored `r_sk` column
/// must agree with the key-rate identity.
pub fn read_skr_csv<R: Read>(input: R) -> Result<Vec<SkrRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: SkrRow = row?;
        let est = |v| MiEstimate { value_bits: v, k: row.k, n: row.n };
        let rec = SkrRecord::new(
            row.sat,
            row.start_epoch,
            row.elev_deg.zip(row.azim_deg),
            est(row.i_ab),
            est(row.i_ae),
            est(row.i_be),
        );
        if rec.r_sk != row.r_sk {
            return Err(Error::Parse(format!(
                "{} at {}: r_sk column {} disagrees with {}",
                row.sat, row.start_epoch, row.r_sk, rec.r_sk
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

//! Synthetic three-receiver scenarios with known information content.
//!
//! Random stream: `ChaCha8Rng::seed_from_u64(seed)`. Uniforms are
//! `(next_u64() >> 11) · 2⁻⁵³`; each standard normal consumes two
//! uniforms via Box-Muller, `sqrt(−2 ln(1 − u1)) · cos(2π u2)`. The core
//! triple is drawn first (row-major, roles a, b, e per sample), then the
//! per-role noise (same layout).

use std::collections::BTreeSet;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{GfSample, GfSeries, DEFAULT_SAMPLE_RATE};
use crate::preprocess::savgol;
use crate::scalar::{population_std, Real};
use crate::ubx::{Role, SatGeometry, SatelliteId};

/// `−½ log2(1 − ρ²)`: mutual information of a bivariate normal pair.
pub fn closed_form_gaussian_mi<T: Real>(rho: T) -> Result<T> {
    if !(rho.abs() < T::one()) {
        return Err(Error::Domain(format!("|rho| = {} must be below 1", rho.abs())));
    }
    Ok(-(T::one() - rho * rho).log2() / T::two())
}

/// Normal variates from the documented stream.
pub struct GaussianStream {
    rng: ChaCha8Rng,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        GaussianStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Scenario description. Roles are ordered alice, bob, eve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n: usize,
    pub rho_ab: f64,
    pub rho_ae: f64,
    pub rho_be: f64,
    /// Polynomial coefficients (ascending powers of t ∈ [−1, 1]) added
    /// to each role.
    pub trend_a: Vec<f64>,
    pub trend_b: Vec<f64>,
    pub trend_e: Vec<f64>,
    /// Standard deviation of independent white noise per role, relative
    /// to the unit-variance smooth core.
    pub noise_a: f64,
    pub noise_b: f64,
    pub noise_e: f64,
    /// Order-1 Savitzky-Golay window that gives the core its temporal
    /// correlation; 1 disables smoothing.
    pub smoothing_window: usize,
    pub seed: u64,
    pub sample_rate: f64,
    pub start_epoch: f64,
    pub sat: SatelliteId,
    pub elevation: Option<f64>,
    pub azimuth: Option<f64>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        let trend = vec![0.0, 2.0, -1.0, 0.5, 0.25, -0.1];
        ScenarioSpec {
            n: 6000,
            rho_ab: 0.95,
            rho_ae: 0.1,
            rho_be: 0.1,
            trend_a: trend.clone(),
            trend_b: trend.clone(),
            trend_e: trend,
            noise_a: 0.05,
            noise_b: 0.05,
            noise_e: 0.05,
            smoothing_window: 21,
            seed: 1,
            sample_rate: DEFAULT_SAMPLE_RATE,
            start_epoch: 2100.0 * crate::ubx::SECONDS_PER_WEEK,
            sat: SatelliteId::new(crate::ubx::Constellation::Gps, 27).unwrap(),
            elevation: None,
            azimuth: None,
        }
    }
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn correlation(&self) -> [[f64; 3]; 3] {
        [
            [1.0, self.rho_ab, self.rho_ae],
            [self.rho_ab, 1.0, self.rho_be],
            [self.rho_ae, self.rho_be, 1.0],
        ]
    }

    pub fn with_correlations(mut self, rho_ab: f64, rho_ae: f64, rho_be: f64) -> Self {
        self.rho_ab = rho_ab;
        self.rho_ae = rho_ae;
        self.rho_be = rho_be;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Closed-form MI of the Gaussian core for (ab, ae, be), `None` where
    /// |ρ| = 1.
    pub fn ground_truth_mi(&self) -> [Option<f64>; 3] {
        [self.rho_ab, self.rho_ae, self.rho_be].map(|r| closed_form_gaussian_mi(r).ok())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Scenario(format!("n = {} too small", self.n)));
        }
        for (name, r) in [("rho_ab", self.rho_ab), ("rho_ae", self.rho_ae), ("rho_be", self.rho_be)] {
            if !(-1.0..=1.0).contains(&r) {
                return Err(Error::Scenario(format!("{name} = {r} outside [-1, 1]")));
            }
        }
        for (name, s) in [("noise_a", self.noise_a), ("noise_b", self.noise_b), ("noise_e", self.noise_e)] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Scenario(format!("{name} = {s} must be non-negative")));
            }
        }
        if self.smoothing_window.is_multiple_of(2) || self.smoothing_window > self.n {
            return Err(Error::Scenario(format!(
                "smoothing_window {} must be odd and at most n",
                self.smoothing_window
            )));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::Scenario("sample_rate must be positive".into()));
        }
        if let Some(el) = self.elevation {
            if !(-90.0..=90.0).contains(&el) {
                return Err(Error::Scenario(format!("elevation {el} outside [-90, 90]")));
            }
        }
        correlation_sqrt(&self.correlation()).map(|_| ())
    }
}

/// Symmetric square root of a correlation matrix.
fn correlation_sqrt(c: &[[f64; 3]; 3]) -> Result<Matrix3<f64>> {
    let m = Matrix3::from_fn(|i, j| c[i][j]);
    for i in 0..3 {
        if m[(i, i)] != 1.0 {
            return Err(Error::Scenario(format!("diagonal entry {i} is {}, not 1", m[(i, i)])));
        }
        for j in 0..3 {
            if m[(i, j)] != m[(j, i)] {
                return Err(Error::Scenario("correlation matrix is not symmetric".into()));
            }
        }
    }
    let eig = SymmetricEigen::new(m);
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&l| l < -1e-12) {
        return Err(Error::Scenario(format!(
            "correlation matrix is not positive semi-definite (eigenvalue {bad:.6})"
        )));
    }
    let sqrt_l = Matrix3::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    Ok(eig.eigenvectors * sqrt_l * eig.eigenvectors.transpose())
}

/// `n` draws of the trivariate normal with the spec's correlation.
pub fn gen_gaussian_triple(spec: &ScenarioSpec) -> Result<[Vec<f64>; 3]> {
    spec.validate()?;
    let s = correlation_sqrt(&spec.correlation())?;
    let mut stream = GaussianStream::new(spec.seed);
    Ok(draw_triple(&s, spec.n, &mut stream))
}

fn draw_triple(s: &Matrix3<f64>, n: usize, stream: &mut GaussianStream) -> [Vec<f64>; 3] {
    let mut out = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for _ in 0..n {
        let z = Vector3::new(stream.normal(), stream.normal(), stream.normal());
        let v = s * z;
        for r in 0..3 {
            out[r].push(v[r]);
        }
    }
    out
}

fn eval_poly(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// Smooth correlated core + per-role polynomial trend + white noise.
pub fn gen_satellite_like(spec: &ScenarioSpec) -> Result<[Vec<f64>; 3]> {
    spec.validate()?;
    let s = correlation_sqrt(&spec.correlation())?;
    let mut stream = GaussianStream::new(spec.seed);
    let core = draw_triple(&s, spec.n, &mut stream);
    let noise = draw_triple(&Matrix3::identity(), spec.n, &mut stream);

    let trends = [&spec.trend_a, &spec.trend_b, &spec.trend_e];
    let sigmas = [spec.noise_a, spec.noise_b, spec.noise_e];
    let span = (spec.n - 1) as f64;
    let mut out: [Vec<f64>; 3] = Default::default();
    for r in 0..3 {
        let smooth = if spec.smoothing_window > 1 {
            savgol(&core[r], spec.smoothing_window, 1)?
        } else {
            core[r].clone()
        };
        let sd = population_std(&smooth).unwrap_or(1.0);
        let sd = if sd > 0.0 { sd } else { 1.0 };
        out[r] = (0..spec.n)
            .map(|i| {
                let t = 2.0 * i as f64 / span - 1.0;
                smooth[i] / sd + eval_poly(trends[r], t) + sigmas[r] * noise[r][i]
            })
            .collect();
    }
    Ok(out)
}

/// Wraps generated values into geometry-free series on a regular grid.
pub fn to_gf_series(spec: &ScenarioSpec, values: [Vec<f64>; 3]) -> Result<[GfSeries; 3]> {
    let mut it = values.into_iter().zip(Role::ALL).map(|(v, role)| {
        let samples = v
            .into_iter()
            .enumerate()
            .map(|(i, value)| GfSample {
                epoch: spec.start_epoch + i as f64 / spec.sample_rate,
                value,
                valid: true,
            })
            .collect();
        GfSeries::new(spec.sat, role, spec.sample_rate, samples, BTreeSet::new())
    });
    Ok([it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?])
}

/// Constant sky position over the scenario, one record per second.
pub fn scenario_geometry(spec: &ScenarioSpec) -> Result<Vec<SatGeometry>> {
    let (Some(el), Some(az)) = (spec.elevation, spec.azimuth) else {
        return Ok(Vec::new());
    };
    let seconds = (spec.n as f64 / spec.sample_rate).ceil() as usize;
    (0..seconds)
        .map(|s| SatGeometry::new(spec.start_epoch + s as f64, spec.sat, el, az))
        .collect()
}

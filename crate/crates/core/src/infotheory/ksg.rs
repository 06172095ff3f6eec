//! Kraskov–Stögbauer–Grassberger mutual information estimator (first
//! algorithm: max-norm k-th neighbour radius, strict marginal counts).

use rayon::prelude::*;

use super::digamma::digamma;
use crate::error::{Error, Result};
use crate::preprocess::normalize;
use crate::scalar::Real;

pub const DEFAULT_K: usize = 4;

/// Mutual information estimate in bits. May be slightly negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiEstimate<T> {
    pub value_bits: T,
    pub k: usize,
    pub n: usize,
}

impl<T: Real> MiEstimate<T> {
    pub fn to_f64(&self) -> MiEstimate<f64> {
        MiEstimate {
            value_bits: self.value_bits.to_f64_lossy(),
            k: self.k,
            n: self.n,
        }
    }
}

/// Estimator configuration.
///
/// Both marginals are z-scored before the neighbour search, which makes
/// the estimate invariant to affine maps of either input. A marginal that
/// contains repeated values gets a deterministic perturbation of at most
/// `1e-10` of its range, derived from the sample index and `jitter_seed`.
#[derive(Debug, Clone, Copy)]
pub struct Ksg<T> {
    pub k: usize,
    pub jitter_seed: u64,
    /// Exposed so self-tests can substitute a faulty implementation.
    pub digamma: fn(T) -> T,
}

impl<T: Real> Default for Ksg<T> {
    fn default() -> Self {
        Ksg::new(DEFAULT_K)
    }
}

/// Mixes a 64-bit value (splitmix64 finalizer).
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn has_repeats<T: Real>(v: &[T]) -> bool {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s.windows(2).any(|w| w[0] == w[1])
}

fn jitter_repeats<T: Real>(v: &mut [T], seed: u64) {
    if !has_repeats(v) {
        return;
    }
    let (lo, hi) = v
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(l, h), &x| (l.min(x), h.max(x)));
    let amp = T::of(1e-10) * (hi - lo);
    let scale = 1.0 / (1u64 << 53) as f64;
    for (i, x) in v.iter_mut().enumerate() {
        let u = (splitmix64(seed ^ (i as u64).wrapping_mul(0xA24B_AED4_963E_E407)) >> 11) as f64 * scale;
        *x = *x + amp * T::of(2.0 * u - 1.0);
    }
}

impl<T: Real> Ksg<T> {
    pub fn new(k: usize) -> Self {
        Ksg {
            k,
            jitter_seed: 0,
            digamma: digamma::<T>,
        }
    }

    fn prepare(&self, v: &[T], name: &str) -> Result<Vec<T>> {
        let mut z = normalize(v).map_err(|_| Error::Degenerate(format!("{name} is constant")))?;
        jitter_repeats(&mut z, self.jitter_seed);
        Ok(z)
    }

    pub fn estimate(&self, x: &[T], y: &[T]) -> Result<MiEstimate<T>> {
        let n = x.len();
        if y.len() != n {
            return Err(Error::Parameter(format!("length mismatch: {n} vs {}", y.len())));
        }
        if self.k == 0 || n <= self.k {
            return Err(Error::Parameter(format!("need n > k >= 1 (n = {n}, k = {})", self.k)));
        }
        let x = self.prepare(x, "x")?;
        let y = self.prepare(y, "y")?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap().then(a.cmp(&b)));
        let sorted_x: Vec<T> = order.iter().map(|&i| x[i]).collect();
        let mut sorted_y = y.clone();
        sorted_y.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let k = self.k;
        let counts: Vec<(usize, usize)> = (0..n)
            .into_par_iter()
            .map(|p| {
                let i = order[p];
                let eps = kth_neighbour_radius(&x, &y, &order, p, k);
                (
                    count_strictly_within(&sorted_x, x[i], eps),
                    count_strictly_within(&sorted_y, y[i], eps),
                )
            })
            .collect();

        // Summed in sample order so the result does not depend on the
        // argument order or thread scheduling.
        let mut per_sample = vec![(0usize, 0usize); n];
        for (p, c) in counts.into_iter().enumerate() {
            per_sample[order[p]] = c;
        }
        let psi = self.digamma;
        let mut acc = T::zero();
        for &(nx, ny) in &per_sample {
            acc = acc + (psi(T::of_usize(nx + 1)) + psi(T::of_usize(ny + 1)));
        }
        let nats = psi(T::of_usize(k)) - acc / T::of_usize(n) + psi(T::of_usize(n));
        Ok(MiEstimate {
            value_bits: nats / T::LN_2(),
            k,
            n,
        })
    }
}

/// Max-norm distance from point `order[p]` to its k-th nearest neighbour,
/// sweeping outwards through the x-sorted order.
fn kth_neighbour_radius<T: Real>(x: &[T], y: &[T], order: &[usize], p: usize, k: usize) -> T {
    let i = order[p];
    let (xi, yi) = (x[i], y[i]);
    // ascending k smallest distances so far
    let mut best: Vec<T> = Vec::with_capacity(k + 1);
    let mut left = p;
    let mut right = p + 1;
    loop {
        let dl = (left > 0).then(|| (x[order[left - 1]] - xi).abs());
        let dr = (right < order.len()).then(|| (x[order[right]] - xi).abs());
        let (take_left, dx) = match (dl, dr) {
            (None, None) => break,
            (Some(a), None) => (true, a),
            (None, Some(b)) => (false, b),
            (Some(a), Some(b)) => {
                if a <= b {
                    (true, a)
                } else {
                    (false, b)
                }
            }
        };
        if best.len() == k && dx >= best[k - 1] {
            break;
        }
        let j = if take_left {
            left -= 1;
            order[left]
        } else {
            right += 1;
            order[right - 1]
        };
        let d = dx.max((y[j] - yi).abs());
        if best.len() < k || d < best[k - 1] {
            let pos = best.partition_point(|&b| b <= d);
            best.insert(pos, d);
            best.truncate(k);
        }
    }
    best[k - 1]
}

/// `#{j ≠ i : |v_j − v_i| < eps}` over an ascending slice containing `v_i`.
fn count_strictly_within<T: Real>(sorted: &[T], vi: T, eps: T) -> usize {
    // fl(a − b) is monotone in b, so both predicates partition the slice
    let lo = sorted.partition_point(|&v| vi - v >= eps);
    let hi = sorted.partition_point(|&v| v - vi < eps);
    (hi - lo).saturating_sub(1)
}

/// KSG estimate with default settings and neighbour count `k`.
pub fn ksg_mi<T: Real>(x: &[T], y: &[T], k: usize) -> Result<MiEstimate<T>> {
    Ksg::new(k).estimate(x, y)
}

//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar used by the pre-processing and estimation code.
///
/// Implemented for `f32` and `f64`. Observation records stay in `f64`
/// (carrier phase counts need the full mantissa); only the block-level
/// numerics are generic.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("count representable in scalar type")
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Arithmetic mean; `None` for an empty slice.
pub fn mean<T: Real>(x: &[T]) -> Option<T> {
    if x.is_empty() {
        return None;
    }
    Some(x.iter().copied().sum::<T>() / T::of_usize(x.len()))
}

/// Population standard deviation (1/n); `None` for an empty slice.
pub fn population_std<T: Real>(x: &[T]) -> Option<T> {
    let m = mean(x)?;
    let ss: T = x.iter().map(|&v| (v - m) * (v - m)).sum();
    Some((ss / T::of_usize(x.len())).sqrt())
}

/// Pearson correlation of two equal-length slices.
pub fn correlation<T: Real>(x: &[T], y: &[T]) -> Option<T> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let mx = mean(x)?;
    let my = mean(y)?;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    let mut syy = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        sxy = sxy + (a - mx) * (b - my);
        sxx = sxx + (a - mx) * (a - mx);
        syy = syy + (b - my) * (b - my);
    }
    Some(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let x = [1.0f64, 3.0];
        assert_eq!(mean(&x), Some(2.0));
        assert_eq!(population_std(&x), Some(1.0));
        assert_eq!(mean::<f32>(&[]), None);
    }

    #[test]
    fn correlation_of_affine_copy_is_one() {
        let x = [0.5f64, 1.0, -2.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        assert!((correlation(&x, &y).unwrap() - 1.0).abs() < 1e-12);
    }
}

use crate::scalar::Real;

/// Digamma function ψ(x).
///
/// Shifts the argument above 10 with ψ(x) = ψ(x + 1) − 1/x, then sums the
/// asymptotic series. Negative non-integers go through the reflection
/// formula; poles return NaN.
pub fn digamma<T: Real>(x: T) -> T {
    if x.is_nan() || x == T::neg_infinity() {
        return T::nan();
    }
    if x <= T::zero() {
        if x == x.floor() {
            return T::nan();
        }
        // ψ(1 − x) − ψ(x) = π cot(πx)
        let pi = T::PI();
        return digamma(T::one() - x) - pi / (pi * x).tan();
    }
    let mut acc = T::zero();
    let mut z = x;
    let ten = T::of(10.0);
    while z < ten {
        acc = acc - z.recip();
        z = z + T::one();
    }
    let inv = z.recip();
    let inv2 = inv * inv;
    // B_2k / 2k terms
    let coef = [
        1.0 / 12.0,
        1.0 / 120.0,
        1.0 / 252.0,
        1.0 / 240.0,
        1.0 / 132.0,
        691.0 / 32760.0,
    ];
    let mut series = T::zero();
    for c in coef.iter().rev() {
        series = T::of(*c) - inv2 * series;
    }
    let series = inv2 * series;
    acc + z.ln() - T::of(0.5) * inv - series
}

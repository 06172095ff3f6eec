use crate::scalar::Real;

/// Orthonormal polynomial basis (degrees `0..=degree`) sampled at `t`.
///
/// Starts from Legendre polynomials, which are already close to orthogonal
/// on a uniform grid over [-1, 1], then runs modified Gram-Schmidt twice.
pub(crate) fn orthonormal_basis<T: Real>(t: &[T], degree: usize) -> Vec<Vec<T>> {
    let n = t.len();
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(degree + 1);
    let mut p_prev = vec![T::one(); n];
    let mut p_cur = t.to_vec();
    for k in 0..=degree {
        let mut v = match k {
            0 => vec![T::one(); n],
            1 => t.to_vec(),
            _ => {
                // (k) P_k = (2k - 1) t P_{k-1} - (k - 1) P_{k-2}
                let kk = T::of_usize(k);
                let a = T::of_usize(2 * k - 1);
                let b = T::of_usize(k - 1);
                let next: Vec<T> = (0..n)
                    .map(|j| (a * t[j] * p_cur[j] - b * p_prev[j]) / kk)
                    .collect();
                p_prev = std::mem::replace(&mut p_cur, next);
                p_cur.clone()
            }
        };
        for _pass in 0..2 {
            for q in &basis {
                let proj = dot(q, &v);
                for (vj, &qj) in v.iter_mut().zip(q) {
                    *vj = *vj - proj * qj;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        for vj in v.iter_mut() {
            *vj = *vj / norm;
        }
        basis.push(v);
    }
    basis
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// `n` points evenly spread over [-1, 1] (a single point sits at 0).
pub(crate) fn unit_abscissa<T: Real>(n: usize) -> Vec<T> {
    if n == 1 {
        return vec![T::zero()];
    }
    let span = T::of_usize(n - 1);
    (0..n)
        .map(|j| T::two() * T::of_usize(j) / span - T::one())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal() {
        let t = unit_abscissa::<f64>(6000);
        let q = orthonormal_basis(&t, 5);
        for i in 0..q.len() {
            for j in 0..q.len() {
                let d = dot(&q[i], &q[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-12, "<q{i}, q{j}> = {d}");
            }
        }
    }
}

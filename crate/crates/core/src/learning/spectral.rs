//! Spectral normalization by power iteration.

use nalgebra::{DMatrix, DVector};

pub const POWER_ITERATIONS: usize = 20;

/// Estimates the largest singular value of `w` with `iterations` rounds of
/// power iteration on `WᵀW`, starting from (and updating) `v`.
pub fn power_iteration_sigma(w: &DMatrix<f64>, v: &mut DVector<f64>, iterations: usize) -> f64 {
    assert_eq!(v.len(), w.ncols());
    if v.norm() == 0.0 {
        v.fill(1.0);
    }
    let mut sigma = 0.0;
    for _ in 0..iterations {
        let u = w * &*v;
        let un = u.norm();
        if un == 0.0 {
            return 0.0;
        }
        let next = w.transpose() * (u / un);
        let vn = next.norm();
        if vn == 0.0 {
            return 0.0;
        }
        *v = next / vn;
        sigma = vn;
    }
    sigma
}

/// Scales `w` by `cap / σ_max` when the estimated `σ_max` exceeds `cap`.
/// Returns the estimate before scaling.
pub fn spectral_normalize_with(w: &mut DMatrix<f64>, cap: f64, v: &mut DVector<f64>) -> f64 {
    assert!(cap > 0.0, "spectral cap must be positive");
    let sigma = power_iteration_sigma(w, v, POWER_ITERATIONS);
    if sigma > cap {
        *w *= cap / sigma;
    }
    sigma
}

/// Cold-start variant of [`spectral_normalize_with`].
pub fn spectral_normalize(w: &DMatrix<f64>, cap: f64) -> DMatrix<f64> {
    let mut out = w.clone();
    let mut v = DVector::from_element(w.ncols(), 1.0 / (w.ncols() as f64).sqrt());
    spectral_normalize_with(&mut out, cap, &mut v);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_is_rescaled() {
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let out = spectral_normalize(&w, 2.0);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0 / 3.0]));
        assert!((out - expected).abs().max() < 1e-9);
    }

    #[test]
    fn identity_is_untouched() {
        let w = DMatrix::<f64>::identity(4, 4);
        assert_eq!(spectral_normalize(&w, 2.0), w);
    }

    #[test]
    fn zero_matrix_is_untouched() {
        let w = DMatrix::<f64>::zeros(3, 5);
        assert_eq!(spectral_normalize(&w, 2.0), w);
    }
}

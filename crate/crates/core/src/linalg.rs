//! Small dense helpers shared by the Fisher and rate computations.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalue ratio below which a covariance gets diagonal jitter.
pub const CONDITION_FLOOR: f64 = 1e-12;

/// Diagonal jitter added to ill-conditioned covariances.
pub const JITTER: f64 = 1e-10;

/// `G^T R^{-1} G` for symmetric positive semidefinite `R` and an `M x 2` matrix `G`.
///
/// When the smallest eigenvalue of `R` is below [`CONDITION_FLOOR`] times the
/// largest, [`JITTER`] is added to the diagonal and the returned flag is set.
/// `snapshot` is only used to label the error.
pub fn inverse_quadratic_form(
    r: &DMatrix<f64>,
    g: &DMatrix<f64>,
    snapshot: usize,
) -> Result<(Matrix2<f64>, bool)> {
    debug_assert_eq!(g.ncols(), 2);
    let eig = SymmetricEigen::new(r.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let jittered = !(min >= CONDITION_FLOOR * max);
    let shift = if jittered { JITTER } else { 0.0 };
    if !(max > 0.0) || min + shift <= 0.0 {
        return Err(Error::SingularCovariance { snapshot, min_eig: min });
    }
    // project onto the eigenbasis, then scale each row by 1/lambda
    let proj = eig.eigenvectors.transpose() * g;
    let mut out = Matrix2::zeros();
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        let row = proj.row(i);
        let (a, b) = (row[0], row[1]);
        let w = 1.0 / (lambda + shift);
        out[(0, 0)] += w * a * a;
        out[(0, 1)] += w * a * b;
        out[(1, 1)] += w * b * b;
    }
    out[(1, 0)] = out[(0, 1)];
    Ok((out, jittered))
}

/// Pairwise (cascade) summation of 2x2 matrices in slice order.
pub fn pairwise_sum(terms: &[Matrix2<f64>]) -> Matrix2<f64> {
    match terms.len() {
        0 => Matrix2::zeros(),
        1 => terms[0],
        n if n <= 8 => terms.iter().fold(Matrix2::zeros(), |acc, t| acc + t),
        n => {
            let (lo, hi) = terms.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

/// Eigenvalues of a symmetric 2x2 matrix, ascending.
pub fn sym2_eigenvalues(m: &Matrix2<f64>) -> [f64; 2] {
    let mean = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let half_diff = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let rad = half_diff.hypot(off);
    [mean - rad, mean + rad]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_form_matches_direct_inverse() {
        let r = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.5, 0.2, 0.1, 0.2, 1.0]);
        let g = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.3, -1.0, 2.0, 0.5]);
        let (q, jit) = inverse_quadratic_form(&r, &g, 0).unwrap();
        assert!(!jit);
        let direct = g.transpose() * r.clone().try_inverse().unwrap() * &g;
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(q[(i, j)], direct[(i, j)], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn rank_deficient_gets_jitter() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 0.8, -0.2, 1.0]);
        let r = &a * a.transpose();
        let g = a.clone();
        let (_, jit) = inverse_quadratic_form(&r, &g, 4).unwrap();
        assert!(jit);
        let neg = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let err = inverse_quadratic_form(&neg, &DMatrix::identity(2, 2), 9).unwrap_err();
        assert!(matches!(err, Error::SingularCovariance { snapshot: 9, .. }));
    }

    #[test]
    fn pairwise_sum_matches_fold() {
        let terms: Vec<_> = (0..37).map(|i| Matrix2::new(i as f64, 1.0, 1.0, 0.5 * i as f64)).collect();
        let s = pairwise_sum(&terms);
        assert_eq!(s[(0, 0)], 666.0);
        assert_eq!(s[(0, 1)], 37.0);
    }

    #[test]
    fn eigenvalues_2x2() {
        let [lo, hi] = sym2_eigenvalues(&Matrix2::new(2.0, 1.0, 1.0, 2.0));
        assert_relative_eq!(lo, 1.0, epsilon = 1e-15);
        assert_relative_eq!(hi, 3.0, epsilon = 1e-15);
    }
}

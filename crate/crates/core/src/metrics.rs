//! Matrix norms and spectral utilities.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Nonzero tolerance used by the l0 count: thresholded entries are exact
/// zeros but solver output is not.
pub const L0_TOL: f64 = 1e-12;

const POWER_ITER_CAP: usize = 100_000;
const DENSE_EIG_CUTOFF: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    /// Entries with absolute value above the tolerance.
    pub l0: usize,
    /// Sum of absolute entries.
    pub l1: f64,
    /// Largest absolute entry.
    pub sup: f64,
    /// Largest singular value.
    pub spectral: f64,
    pub frobenius: f64,
}

/// All five norms of a rectangular matrix, with the default l0 tolerance.
pub fn norms(a: &DMatrix<f64>) -> NormReport {
    norms_with_tol(a, L0_TOL)
}

pub fn norms_with_tol(a: &DMatrix<f64>, l0_tol: f64) -> NormReport {
    let mut l0 = 0usize;
    let mut l1 = 0.0;
    let mut sup = 0.0f64;
    let mut fro2 = 0.0;
    for &v in a.iter() {
        let av = v.abs();
        if av > l0_tol {
            l0 += 1;
        }
        l1 += av;
        sup = sup.max(av);
        fro2 += v * v;
    }
    let spectral = a
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    NormReport {
        l0,
        l1,
        sup,
        spectral,
        frobenius: fro2.sqrt(),
    }
}

fn require_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidInput("matrix must be square".into()));
    }
    let scale = a.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::InvalidInput(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Largest absolute eigenvalue of a symmetric matrix.
///
/// Small matrices use a dense symmetric eigensolve; larger ones run power
/// iteration on A^2 so sign changes in the dominant eigenvalue cannot stall
/// convergence.
pub fn spectral_norm(a: &DMatrix<f64>, tol: f64) -> Result<f64> {
    require_symmetric(a)?;
    let d = a.nrows();
    if d <= DENSE_EIG_CUTOFF {
        let eig = SymmetricEigen::new(a.clone());
        return Ok(eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs())));
    }
    // power iteration on A^2
    let mut v = nalgebra::DVector::from_fn(d, |i, _| 1.0 + (i as f64 * 0.7).sin());
    v /= v.norm();
    let mut lambda2 = 0.0f64;
    for it in 0..POWER_ITER_CAP {
        let w = a * (a * &v);
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let next = w / norm;
        let new_lambda2 = (a * &next).norm_squared();
        let rel = (new_lambda2 - lambda2).abs() / new_lambda2.max(f64::MIN_POSITIVE);
        v = next;
        lambda2 = new_lambda2;
        if rel <= tol && it > 0 {
            return Ok(lambda2.sqrt());
        }
    }
    Err(Error::NonConvergence {
        best: lambda2.sqrt(),
        iterations: POWER_ITER_CAP,
    })
}

/// Default-tolerance spectral norm.
pub fn spectral_norm_default(a: &DMatrix<f64>) -> Result<f64> {
    spectral_norm(a, 1e-9)
}

/// Smallest eigenvalue of a symmetric matrix (dense eigensolve).
pub fn min_eigenvalue(a: &DMatrix<f64>) -> Result<f64> {
    require_symmetric(a)?;
    let eig = SymmetricEigen::new(a.clone());
    Ok(eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min))
}

/// Row-wise q-sparsity statistics: max over rows of sum_j |a_ij|^q, plus the
/// largest diagonal entry. 0^0 is taken as 0 so q = 0 counts nonzeros.
pub fn sparsity_class_stats(a: &DMatrix<f64>, q: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidInput(format!("q must lie in [0, 1), got {q}")));
    }
    let mut max_row = 0.0f64;
    for i in 0..a.nrows() {
        let mut row_sum = 0.0;
        for j in 0..a.ncols() {
            let av = a[(i, j)].abs();
            if av > 0.0 {
                row_sum += av.powf(q);
            }
        }
        max_row = max_row.max(row_sum);
    }
    let max_diag = (0..a.nrows().min(a.ncols()))
        .map(|i| a[(i, i)])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((max_row, max_diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn norms_identity() {
        let r = norms(&DMatrix::identity(3, 3));
        assert_eq!(r.l0, 3);
        assert_eq!(r.l1, 3.0);
        assert_eq!(r.sup, 1.0);
        assert!((r.spectral - 1.0).abs() < 1e-12);
        assert!((r.frobenius - 3.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn norms_zero_matrix() {
        let r = norms(&DMatrix::zeros(4, 2));
        assert_eq!(r.l0, 0);
        assert_eq!(r.l1, 0.0);
        assert_eq!(r.sup, 0.0);
        assert_eq!(r.spectral, 0.0);
        assert_eq!(r.frobenius, 0.0);
    }

    #[test]
    fn norms_rank_one() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 4.0, 0.0]);
        let r = norms(&a);
        assert!((r.frobenius - 5.0).abs() < 1e-12);
        assert!((r.spectral - 5.0).abs() < 1e-10);
        assert_eq!(r.l0, 2);
    }

    #[test]
    fn spectral_norm_diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::dvector![1.0, -3.0, 2.0]);
        assert!((spectral_norm_default(&a).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn spectral_norm_rank_one_outer_product() {
        let v = nalgebra::dvector![1.0, 2.0, -1.0];
        let a = &v * v.transpose();
        let expected = v.norm_squared();
        assert!((spectral_norm_default(&a).unwrap() - expected).abs() < 1e-8);
    }

    #[test]
    fn power_iteration_matches_dense_oracle() {
        // d > cutoff so the power-iteration path runs
        let d = 80;
        let mut rng_state = 12345u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut a = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..=i {
                let v = next();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let oracle = SymmetricEigen::new(a.clone())
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, &v| m.max(v.abs()));
        let got = spectral_norm(&a, 1e-12).unwrap();
        assert!((got - oracle).abs() < 1e-8 * oracle.max(1.0), "{got} vs {oracle}");
    }

    #[test]
    fn min_eigenvalue_diagonal() {
        assert!((min_eigenvalue(&DMatrix::identity(3, 3)).unwrap() - 1.0).abs() < 1e-12);
        let a = DMatrix::from_diagonal(&nalgebra::dvector![5.0, 0.1]);
        assert!((min_eigenvalue(&a).unwrap() - 0.1).abs() < 1e-10);
    }

    #[test]
    fn sparsity_stats_identity_q0() {
        let (row, diag) = sparsity_class_stats(&DMatrix::identity(4, 4), 0.0).unwrap();
        assert_eq!(row, 1.0);
        assert_eq!(diag, 1.0);
    }

    #[test]
    fn sparsity_stats_tridiagonal_q0() {
        let d = 6;
        let a = DMatrix::from_fn(d, d, |i, j| {
            if i.abs_diff(j) <= 1 { 1.0 } else { 0.0 }
        });
        let (row, _) = sparsity_class_stats(&a, 0.0).unwrap();
        assert_eq!(row, 3.0);
    }

    #[test]
    fn sparsity_stats_ar1_matches_direct_sum() {
        let d = 20;
        let rho: f64 = 0.5;
        let q = 0.5;
        let a = DMatrix::from_fn(d, d, |i, j| rho.powi(i.abs_diff(j) as i32));
        let (row, diag) = sparsity_class_stats(&a, q).unwrap();
        let mut expected = 0.0f64;
        for i in 0..d {
            let s: f64 = (0..d)
                .map(|j| rho.powi(i.abs_diff(j) as i32).abs().powf(q))
                .sum();
            expected = expected.max(s);
        }
        assert!((row - expected).abs() < 1e-12);
        assert_eq!(diag, 1.0);
    }

    fn arb_symmetric(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
        proptest::collection::vec(-5.0..5.0f64, d * d).prop_map(move |v| {
            let a = DMatrix::from_row_slice(d, d, &v);
            (&a + a.transpose()) * 0.5
        })
    }

    proptest! {
        #[test]
        fn spectral_at_most_frobenius(a in arb_symmetric(6)) {
            let r = norms(&a);
            prop_assert!(r.spectral <= r.frobenius + 1e-9);
        }

        #[test]
        fn spectral_norm_sign_and_transpose_invariant(a in arb_symmetric(5)) {
            let s = spectral_norm_default(&a).unwrap();
            prop_assert!((spectral_norm_default(&(-a.clone())).unwrap() - s).abs() < 1e-9);
            prop_assert!((spectral_norm_default(&a.transpose()).unwrap() - s).abs() < 1e-9);
        }

        #[test]
        fn norms_permutation_invariant(a in arb_symmetric(5)) {
            let d = a.nrows();
            let perm: Vec<usize> = (0..d).rev().collect();
            let b = DMatrix::from_fn(d, d, |i, j| a[(perm[i], perm[j])]);
            let ra = norms(&a);
            let rb = norms(&b);
            prop_assert_eq!(ra.l0, rb.l0);
            prop_assert!((ra.l1 - rb.l1).abs() < 1e-9);
            prop_assert!((ra.sup - rb.sup).abs() < 1e-12);
            prop_assert!((ra.spectral - rb.spectral).abs() < 1e-8);
            prop_assert!((ra.frobenius - rb.frobenius).abs() < 1e-9);
        }
    }
}

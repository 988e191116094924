//! Generalized thresholding operators and their element-wise application.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimator::CovarianceEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdKind {
    Hard,
    Soft,
}

impl std::fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ThresholdKind::Hard => write!(f, "hard"),
            ThresholdKind::Soft => write!(f, "soft"),
        }
    }
}

impl std::str::FromStr for ThresholdKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(ThresholdKind::Hard),
            "soft" => Ok(ThresholdKind::Soft),
            other => Err(Error::InvalidInput(format!(
                "unknown threshold kind '{other}' (expected hard|soft)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdOperator {
    pub kind: ThresholdKind,
    pub lambda: f64,
}

impl ThresholdOperator {
    pub fn new(kind: ThresholdKind, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "threshold lambda must be nonnegative, got {lambda}"
            )));
        }
        Ok(Self { kind, lambda })
    }

    pub fn apply_scalar(&self, x: f64) -> f64 {
        match self.kind {
            ThresholdKind::Hard => hard_threshold(x, self.lambda),
            ThresholdKind::Soft => soft_threshold(x, self.lambda),
        }
    }
}

/// sign(x) * (|x| - lambda)_+
pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    x.signum() * (x.abs() - lambda).max(0.0)
}

/// x when |x| > lambda, else 0.
pub fn hard_threshold(x: f64, lambda: f64) -> f64 {
    if x.abs() > lambda {
        x
    } else {
        0.0
    }
}

/// Entry-wise thresholding of a covariance estimate, diagonal included.
pub fn apply_threshold(sigma: &CovarianceEstimate, op: &ThresholdOperator) -> CovarianceEstimate {
    apply_threshold_opts(sigma, op, false)
}

/// Variant that can leave the diagonal untouched (off by default; the
/// definition thresholds every entry).
pub fn apply_threshold_opts(
    sigma: &CovarianceEstimate,
    op: &ThresholdOperator,
    skip_diagonal: bool,
) -> CovarianceEstimate {
    let thresholded = threshold_matrix(sigma.sigma(), op, skip_diagonal);
    sigma.with_sigma(thresholded)
}

pub fn threshold_matrix(
    a: &DMatrix<f64>,
    op: &ThresholdOperator,
    skip_diagonal: bool,
) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
        if skip_diagonal && i == j {
            a[(i, j)]
        } else {
            op.apply_scalar(a[(i, j)])
        }
    })
}

/// Default tuning grid for a covariance estimate: 50 log-spaced values from
/// the sup norm down three decades, sorted ascending.
pub fn default_lambda_grid(sigma: &CovarianceEstimate) -> Vec<f64> {
    let sup = sigma.sigma().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let hi = if sup > 0.0 { sup } else { 1.0 };
    log_spaced_grid(hi / 1e3, hi, 50)
}

/// `count` log-spaced values on [lo, hi], ascending.
pub fn log_spaced_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count >= 1);
    if count == 1 {
        return vec![hi];
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (llo + (lhi - llo) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Which of the three operator contract conditions failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractCondition {
    /// |s(x)| <= |x|
    Shrinkage,
    /// s(x) = 0 for |x| <= lambda
    Zeroing,
    /// |s(x) - x| <= lambda
    Proximity,
}

#[derive(Debug, Clone)]
pub struct OperatorCheck {
    pub pass: bool,
    /// First violating probe, if any.
    pub violation: Option<(f64, ContractCondition)>,
}

/// Checks the three generalized-thresholding conditions for an arbitrary
/// scalar map at every probe point. Generic so test doubles can be injected.
pub fn validate_operator<F: Fn(f64) -> f64>(
    map: F,
    lambda: f64,
    probe_points: &[f64],
) -> Result<OperatorCheck> {
    if probe_points.is_empty() {
        return Err(Error::InvalidInput("probe set must be nonempty".into()));
    }
    const EPS: f64 = 1e-12;
    for &x in probe_points {
        let s = map(x);
        if s.abs() > x.abs() + EPS {
            return Ok(OperatorCheck {
                pass: false,
                violation: Some((x, ContractCondition::Shrinkage)),
            });
        }
        if x.abs() <= lambda && s != 0.0 {
            return Ok(OperatorCheck {
                pass: false,
                violation: Some((x, ContractCondition::Zeroing)),
            });
        }
        if (s - x).abs() > lambda + EPS {
            return Ok(OperatorCheck {
                pass: false,
                violation: Some((x, ContractCondition::Proximity)),
            });
        }
    }
    Ok(OperatorCheck {
        pass: true,
        violation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{renormalized_covariance, MaskedDataset};
    use crate::mask::ObservationMask;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn soft_closed_form() {
        assert!((soft_threshold(1.2, 0.5) - 0.7).abs() < 1e-15);
        assert_eq!(soft_threshold(-0.3, 0.5), 0.0);
        assert_eq!(soft_threshold(2.5, 0.0), 2.5);
        assert_eq!(soft_threshold(-2.5, 0.0), -2.5);
    }

    #[test]
    fn hard_closed_form() {
        assert_eq!(hard_threshold(0.4, 0.5), 0.0);
        assert_eq!(hard_threshold(0.6, 0.5), 0.6);
        assert_eq!(hard_threshold(-2.0, 1.0), -2.0);
    }

    fn toy_estimate(entries: &[f64], d: usize) -> CovarianceEstimate {
        // build a CovarianceEstimate whose sigma is the given symmetric matrix
        let n = 3;
        let mask = ObservationMask::new(DMatrix::from_element(n, d, 1u8)).unwrap();
        let data = MaskedDataset::new(DMatrix::zeros(n, d), mask).unwrap();
        let est = renormalized_covariance(&data);
        est.with_sigma(DMatrix::from_row_slice(d, d, entries))
    }

    #[test]
    fn apply_lambda_zero_is_identity() {
        let est = toy_estimate(&[1.0, 0.3, 0.3, 1.0], 2);
        let op = ThresholdOperator::new(ThresholdKind::Soft, 0.0).unwrap();
        assert_eq!(apply_threshold(&est, &op).sigma(), est.sigma());
    }

    #[test]
    fn apply_large_lambda_zeroes_everything() {
        let est = toy_estimate(&[1.0, 0.3, 0.3, 1.0], 2);
        let op = ThresholdOperator::new(ThresholdKind::Soft, 1.0).unwrap();
        assert_eq!(apply_threshold(&est, &op).sigma().iter().filter(|v| **v != 0.0).count(), 0);
    }

    #[test]
    fn apply_soft_hand_computed() {
        let est = toy_estimate(&[1.0, 0.3, 0.3, 1.0], 2);
        let op = ThresholdOperator::new(ThresholdKind::Soft, 0.4).unwrap();
        let out = apply_threshold(&est, &op);
        let expected = DMatrix::from_row_slice(2, 2, &[0.6, 0.0, 0.0, 0.6]);
        assert!((out.sigma() - expected).abs().max() < 1e-12);
    }

    #[test]
    fn skip_diagonal_option() {
        let est = toy_estimate(&[1.0, 0.3, 0.3, 1.0], 2);
        let op = ThresholdOperator::new(ThresholdKind::Soft, 0.4).unwrap();
        let out = apply_threshold_opts(&est, &op, true);
        assert_eq!(out.sigma()[(0, 0)], 1.0);
        assert_eq!(out.sigma()[(0, 1)], 0.0);
    }

    #[test]
    fn negative_lambda_rejected() {
        assert!(ThresholdOperator::new(ThresholdKind::Hard, -0.1).is_err());
    }

    #[test]
    fn validate_both_operators_pass() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let probes: Vec<f64> = (0..100_000).map(|_| rng.random_range(-10.0..10.0)).collect();
        for kind in [ThresholdKind::Hard, ThresholdKind::Soft] {
            let op = ThresholdOperator::new(kind, 0.5).unwrap();
            let check = validate_operator(|x| op.apply_scalar(x), op.lambda, &probes).unwrap();
            assert!(check.pass, "{kind} failed at {:?}", check.violation);
        }
    }

    #[test]
    fn validate_rejects_shifted_map() {
        let lambda = 0.5;
        let check = validate_operator(|x| x + 2.0 * lambda, lambda, &[0.0, 1.0, -1.0]).unwrap();
        assert!(!check.pass);
    }

    #[test]
    fn validate_requires_probes() {
        assert!(validate_operator(|x| x, 0.1, &[]).is_err());
    }

    #[test]
    fn grid_is_sorted_and_spans_three_decades() {
        let est = toy_estimate(&[2.0, 0.5, 0.5, 2.0], 2);
        let grid = default_lambda_grid(&est);
        assert_eq!(grid.len(), 50);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        assert!((grid[49] - 2.0).abs() < 1e-12);
        assert!((grid[0] - 2e-3).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn contract_holds_pointwise(x in -50.0..50.0f64, lambda in 0.0..5.0f64) {
            for kind in [ThresholdKind::Hard, ThresholdKind::Soft] {
                let op = ThresholdOperator::new(kind, lambda).unwrap();
                let s = op.apply_scalar(x);
                prop_assert!(s.abs() <= x.abs() + 1e-12);
                if x.abs() <= lambda {
                    prop_assert_eq!(s, 0.0);
                }
                prop_assert!((s - x).abs() <= lambda + 1e-12);
            }
        }

        #[test]
        fn apply_never_increases_norms(
            entries in proptest::collection::vec(-3.0..3.0f64, 9),
            lambda in 0.0..2.0f64,
        ) {
            let a = DMatrix::from_row_slice(3, 3, &entries);
            let sym = (&a + a.transpose()) * 0.5;
            let est = toy_estimate(sym.as_slice(), 3);
            for kind in [ThresholdKind::Hard, ThresholdKind::Soft] {
                let op = ThresholdOperator::new(kind, lambda).unwrap();
                let out = apply_threshold(&est, &op);
                prop_assert_eq!(out.sigma(), &out.sigma().transpose());
                let before = crate::metrics::norms(est.sigma());
                let after = crate::metrics::norms(out.sigma());
                prop_assert!(after.sup <= before.sup + 1e-12);
                prop_assert!(after.frobenius <= before.frobenius + 1e-9);
                prop_assert!(after.l0 <= before.l0);
            }
        }
    }
}

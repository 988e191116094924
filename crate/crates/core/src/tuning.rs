//! Cross-validation selection of the thresholding and precision penalties.
//!
//! The covariance loss compares the thresholded training-fold estimate
//! against the raw validation-fold estimate in Frobenius norm (comparing a
//! thresholded estimate against itself would always select lambda = 0).
//! The precision loss is the trace of the squared residual
//! (sigma_val omega - I), i.e. its squared Frobenius norm; the literal
//! squared-trace reading is available as an alternative.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::clime;
use crate::error::{Error, Result};
use crate::estimator::{naive_covariance, renormalized_covariance, CovarianceEstimate, MaskedDataset};
use crate::threshold::{threshold_matrix, ThresholdKind, ThresholdOperator};

/// Which covariance feeds the tuned estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovBase {
    Renormalized,
    /// Structural zeros treated as literal 0 values.
    Naive,
}

impl CovBase {
    pub fn estimate(&self, data: &MaskedDataset) -> CovarianceEstimate {
        match self {
            CovBase::Renormalized => renormalized_covariance(data),
            CovBase::Naive => naive_covariance(data),
        }
    }
}

/// Precision CV loss variants; `TraceOfSquare` is the default reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecisionLoss {
    /// Tr[(sigma omega - I)^T (sigma omega - I)]
    TraceOfSquare,
    /// (Tr(sigma omega - I))^2
    SquareOfTrace,
}

#[derive(Debug, Clone)]
pub struct CvConfig {
    pub folds: usize,
    /// Candidate penalties, strictly positive and ascending.
    pub grid: Vec<f64>,
    pub seed: u64,
    pub precision_loss: PrecisionLoss,
}

impl CvConfig {
    pub fn new(folds: usize, grid: Vec<f64>, seed: u64) -> Result<Self> {
        if folds < 2 {
            return Err(Error::InvalidInput(format!(
                "cross validation needs at least 2 folds, got {folds}"
            )));
        }
        if grid.is_empty() {
            return Err(Error::InvalidInput("penalty grid must be nonempty".into()));
        }
        if grid.iter().any(|&g| !(g > 0.0)) {
            return Err(Error::InvalidInput(
                "penalty grid entries must be strictly positive".into(),
            ));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "penalty grid must be strictly ascending".into(),
            ));
        }
        Ok(Self {
            folds,
            grid,
            seed,
            precision_loss: PrecisionLoss::TraceOfSquare,
        })
    }

    pub fn with_precision_loss(mut self, loss: PrecisionLoss) -> Self {
        self.precision_loss = loss;
        self
    }
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub selected: f64,
    /// (penalty, mean loss across folds), one entry per grid point.
    pub curve: Vec<(f64, f64)>,
}

/// Disjoint cover of 0..n into `folds` groups, as equal as divisibility
/// allows, by seeded shuffle.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rows.shuffle(&mut rng);
    let mut assignment = vec![0usize; n];
    for (pos, &row) in rows.iter().enumerate() {
        assignment[row] = pos % folds;
    }
    assignment
}

pub fn fold_split(data: &MaskedDataset, assignment: &[usize], fold: usize) -> Result<(MaskedDataset, MaskedDataset)> {
    let train_rows: Vec<usize> = assignment
        .iter()
        .enumerate()
        .filter(|(_, &f)| f != fold)
        .map(|(i, _)| i)
        .collect();
    let val_rows: Vec<usize> = assignment
        .iter()
        .enumerate()
        .filter(|(_, &f)| f == fold)
        .map(|(i, _)| i)
        .collect();
    if train_rows.is_empty() || val_rows.is_empty() {
        return Err(Error::InvalidInput(format!(
            "fold {fold} is degenerate: {} training rows, {} validation rows",
            train_rows.len(),
            val_rows.len()
        )));
    }
    Ok((data.select_rows(&train_rows)?, data.select_rows(&val_rows)?))
}

/// Selects the thresholding penalty for the re-normalized covariance.
pub fn cv_covariance(
    data: &MaskedDataset,
    kind: ThresholdKind,
    cfg: &CvConfig,
) -> Result<CvResult> {
    cv_covariance_with(data, CovBase::Renormalized, kind, cfg)
}

/// Same scheme against an arbitrary covariance base, used when tuning the
/// naive comparison estimator.
pub fn cv_covariance_with(
    data: &MaskedDataset,
    base: CovBase,
    kind: ThresholdKind,
    cfg: &CvConfig,
) -> Result<CvResult> {
    let assignment = fold_assignment(data.n_rows(), cfg.folds, cfg.seed);
    let mut totals = vec![0.0f64; cfg.grid.len()];
    for fold in 0..cfg.folds {
        let (train, val) = fold_split(data, &assignment, fold)?;
        let sigma_train = base.estimate(&train);
        let sigma_val = base.estimate(&val);
        for (gi, &lambda) in cfg.grid.iter().enumerate() {
            let op = ThresholdOperator::new(kind, lambda)?;
            let thresholded = threshold_matrix(sigma_train.sigma(), &op, false);
            totals[gi] += (&thresholded - sigma_val.sigma()).norm();
        }
    }
    finish_curve(&cfg.grid, totals, cfg.folds)
}

/// Selects the precision penalty. Grid points that are infeasible on any
/// fold get an infinite loss instead of aborting the search.
pub fn cv_precision(data: &MaskedDataset, cfg: &CvConfig) -> Result<CvResult> {
    cv_precision_with(data, CovBase::Renormalized, cfg)
}

pub fn cv_precision_with(data: &MaskedDataset, base: CovBase, cfg: &CvConfig) -> Result<CvResult> {
    let assignment = fold_assignment(data.n_rows(), cfg.folds, cfg.seed);
    let mut totals = vec![0.0f64; cfg.grid.len()];
    for fold in 0..cfg.folds {
        let (train, val) = fold_split(data, &assignment, fold)?;
        let sigma_train = base.estimate(&train);
        let sigma_val = base.estimate(&val);
        for (gi, &lambda) in cfg.grid.iter().enumerate() {
            if totals[gi].is_infinite() {
                continue;
            }
            match clime::estimate_precision(&sigma_train, lambda) {
                Ok(prec) => {
                    totals[gi] +=
                        precision_loss(sigma_val.sigma(), prec.omega(), cfg.precision_loss);
                }
                Err(Error::Infeasible { .. }) => totals[gi] = f64::INFINITY,
                Err(other) => return Err(other),
            }
        }
    }
    finish_curve(&cfg.grid, totals, cfg.folds)
}

pub fn precision_loss(sigma: &DMatrix<f64>, omega: &DMatrix<f64>, loss: PrecisionLoss) -> f64 {
    let resid = sigma * omega - DMatrix::identity(sigma.nrows(), sigma.ncols());
    match loss {
        PrecisionLoss::TraceOfSquare => resid.norm_squared(),
        PrecisionLoss::SquareOfTrace => {
            let t = resid.trace();
            t * t
        }
    }
}

fn finish_curve(grid: &[f64], totals: Vec<f64>, folds: usize) -> Result<CvResult> {
    let curve: Vec<(f64, f64)> = grid
        .iter()
        .zip(totals)
        .map(|(&g, t)| (g, t / folds as f64))
        .collect();
    // ascending grid + strict comparison selects the smallest penalty on ties
    let mut best: Option<(f64, f64)> = None;
    for &(g, loss) in &curve {
        if loss.is_finite() && best.map_or(true, |(_, bl)| loss < bl) {
            best = Some((g, loss));
        }
    }
    let (selected, _) = best.ok_or_else(|| {
        Error::Numerical("every grid point was infeasible during cross validation".into())
    })?;
    Ok(CvResult { selected, curve })
}

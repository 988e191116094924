//! Two-group discriminant classification on observed subvectors.
//!
//! Feature selection uses per-component two-sample t statistics computed
//! only over the rows where that component is observed in each class. The
//! discriminant restricts the shared covariance to the observed index set of
//! the incoming observation, so masked coordinates can never influence the
//! decision.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::clime;
use crate::error::{Error, Result};
use crate::estimator::{available_means, renormalized_covariance, MaskedDataset};
use crate::threshold::{threshold_matrix, ThresholdKind, ThresholdOperator};
use crate::tuning::{cv_covariance, cv_precision, CvConfig};

/// How the shared covariance is regularized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovStrategy {
    Soft,
    Hard,
    Clime,
}

impl std::fmt::Display for CovStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CovStrategy::Soft => write!(f, "soft"),
            CovStrategy::Hard => write!(f, "hard"),
            CovStrategy::Clime => write!(f, "clime"),
        }
    }
}

impl std::str::FromStr for CovStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(CovStrategy::Soft),
            "hard" => Ok(CovStrategy::Hard),
            "clime" => Ok(CovStrategy::Clime),
            other => Err(Error::InvalidInput(format!(
                "unknown estimator '{other}' (expected soft|hard|clime)"
            ))),
        }
    }
}

/// Penalty selection for the shared covariance fit.
#[derive(Debug, Clone)]
pub enum PenaltyChoice {
    Cv(CvConfig),
    Fixed(f64),
}

/// Two-sample t-test variance scheme. Welch is the default since the
/// available-case sample sizes differ per component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TScheme {
    Welch,
    Pooled,
}

/// Per-class available-case means plus the shared regularized covariance.
#[derive(Debug, Clone)]
pub struct DiscriminantModel {
    pub mu: [DVector<f64>; 2],
    pub sigma: DMatrix<f64>,
    /// Ridge added while inverting the precision estimate, 0 if none.
    pub ridge_used: f64,
    pub strategy: CovStrategy,
    pub penalty: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct DiscriminantResult {
    /// Discriminant scores for class 1 and class 2.
    pub delta: [f64; 2],
    /// 0 = class 1, 1 = class 2. Ties go to class 2: classification into
    /// class 1 requires strict inequality.
    pub class: usize,
    /// Ridge added to the observed sub-block, 0 if the direct solve worked.
    pub ridge_used: f64,
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct RepeatOutcome {
    pub class_pct: [f64; 2],
    pub overall_pct: f64,
}

/// Correct-classification percentages averaged over repeated splits.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EvaluationReport {
    pub class_pct: [f64; 2],
    pub overall_pct: f64,
    pub repeats: usize,
    pub per_repeat: Vec<RepeatOutcome>,
}

fn class_rows(labels: &[usize], class: usize) -> Vec<usize> {
    labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == class)
        .map(|(i, _)| i)
        .collect()
}

fn validate_labels(data: &MaskedDataset, labels: &[usize]) -> Result<()> {
    if labels.len() != data.n_rows() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} rows",
            labels.len(),
            data.n_rows()
        )));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidInput(
            "labels must be 0 (class 1) or 1 (class 2)".into(),
        ));
    }
    for class in 0..2 {
        if !labels.contains(&class) {
            return Err(Error::InvalidInput(format!("class {} is empty", class + 1)));
        }
    }
    Ok(())
}

/// Available-case mean and sample variance of one column over the given rows.
fn column_stats(data: &MaskedDataset, rows: &[usize], col: usize) -> (usize, f64, f64) {
    let observed: Vec<f64> = rows
        .iter()
        .filter(|&&i| data.is_observed(i, col))
        .map(|&i| data.values()[(i, col)])
        .collect();
    let n = observed.len();
    if n == 0 {
        return (0, 0.0, 0.0);
    }
    let mean = observed.iter().sum::<f64>() / n as f64;
    let var = if n < 2 {
        0.0
    } else {
        observed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    };
    (n, mean, var)
}

/// Selects the k components with the largest absolute two-sample t
/// statistic, Welch variance by default.
pub fn t_select(data: &MaskedDataset, labels: &[usize], k: usize) -> Result<Vec<usize>> {
    t_select_with(data, labels, k, TScheme::Welch)
}

pub fn t_select_with(
    data: &MaskedDataset,
    labels: &[usize],
    k: usize,
    scheme: TScheme,
) -> Result<Vec<usize>> {
    validate_labels(data, labels)?;
    if k > data.n_cols() {
        return Err(Error::InvalidInput(format!(
            "k = {k} exceeds dimension {}",
            data.n_cols()
        )));
    }
    let rows = [class_rows(labels, 0), class_rows(labels, 1)];
    let mut scored: Vec<(usize, f64)> = (0..data.n_cols())
        .map(|j| {
            let (n1, m1, v1) = column_stats(data, &rows[0], j);
            let (n2, m2, v2) = column_stats(data, &rows[1], j);
            // components observed fewer than twice in either class carry no
            // usable signal
            if n1 < 2 || n2 < 2 {
                return (j, 0.0);
            }
            let diff = m1 - m2;
            let denom2 = match scheme {
                TScheme::Welch => v1 / n1 as f64 + v2 / n2 as f64,
                TScheme::Pooled => {
                    let pooled = ((n1 - 1) as f64 * v1 + (n2 - 1) as f64 * v2)
                        / (n1 + n2 - 2) as f64;
                    pooled * (1.0 / n1 as f64 + 1.0 / n2 as f64)
                }
            };
            let t = if denom2 > 0.0 {
                (diff / denom2.sqrt()).abs()
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            (j, t)
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut selected: Vec<usize> = scored.into_iter().take(k).map(|(j, _)| j).collect();
    selected.sort_unstable();
    Ok(selected)
}

/// Centers every observed entry by its class's available-case mean.
fn class_centered(data: &MaskedDataset, labels: &[usize], mu: &[DVector<f64>; 2]) -> Result<MaskedDataset> {
    let values = DMatrix::from_fn(data.n_rows(), data.n_cols(), |i, j| {
        if data.is_observed(i, j) {
            data.values()[(i, j)] - mu[labels[i]][j]
        } else {
            0.0
        }
    });
    MaskedDataset::new(values, data.mask().clone())
}

/// Inverts omega, escalating a ridge from 1e-8 by factors of 10 when the
/// direct inverse fails or is wildly ill-conditioned.
fn invert_with_ridge(omega: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let d = omega.nrows();
    let mut ridge = 0.0;
    loop {
        let candidate = omega + DMatrix::identity(d, d) * ridge;
        let eig = nalgebra::SymmetricEigen::new(candidate.clone());
        let max_abs = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let min_abs = eig
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, &v| m.min(v.abs()));
        if min_abs > 0.0 && max_abs / min_abs < 1e12 {
            if let Some(inv) = candidate.try_inverse() {
                let sym = (&inv + inv.transpose()) * 0.5;
                return Ok((sym, ridge));
            }
        }
        ridge = if ridge == 0.0 { 1e-8 } else { ridge * 10.0 };
        if ridge > 1e2 {
            return Err(Error::Numerical(
                "could not invert precision estimate even with a large ridge".into(),
            ));
        }
    }
}

/// Fits class means and the shared covariance on training data.
///
/// The shared covariance is the re-normalized pairwise covariance of the
/// class-centered pooled rows, regularized by the chosen strategy.
pub fn fit_lda(
    train: &MaskedDataset,
    labels: &[usize],
    strategy: CovStrategy,
    penalty: &PenaltyChoice,
) -> Result<DiscriminantModel> {
    validate_labels(train, labels)?;
    for class in 0..2 {
        if class_rows(labels, class).len() < 2 {
            return Err(Error::InvalidInput(format!(
                "class {} has fewer than 2 training rows",
                class + 1
            )));
        }
    }
    let mu = [
        available_means(&train.select_rows(&class_rows(labels, 0))?),
        available_means(&train.select_rows(&class_rows(labels, 1))?),
    ];
    let centered = class_centered(train, labels, &mu)?;
    let pooled = renormalized_covariance(&centered);
    let (sigma, ridge_used, selected_penalty) = match strategy {
        CovStrategy::Soft | CovStrategy::Hard => {
            let kind = if strategy == CovStrategy::Soft {
                ThresholdKind::Soft
            } else {
                ThresholdKind::Hard
            };
            let lambda = match penalty {
                PenaltyChoice::Fixed(l) => *l,
                PenaltyChoice::Cv(cfg) => cv_covariance(&centered, kind, cfg)?.selected,
            };
            let op = ThresholdOperator::new(kind, lambda)?;
            (threshold_matrix(pooled.sigma(), &op, false), 0.0, lambda)
        }
        CovStrategy::Clime => {
            let lambda = match penalty {
                PenaltyChoice::Fixed(l) => *l,
                PenaltyChoice::Cv(cfg) => cv_precision(&centered, cfg)?.selected,
            };
            let prec = clime::estimate_precision(&pooled, lambda)?;
            let (sigma, ridge) = invert_with_ridge(prec.omega())?;
            (sigma, ridge, lambda)
        }
    };
    Ok(DiscriminantModel {
        mu,
        sigma,
        ridge_used,
        strategy,
        penalty: selected_penalty,
    })
}

/// Evaluates the discriminant scores of one masked observation.
///
/// `x` carries the full d-vector; only the coordinates listed in `observed`
/// participate. The observed sub-block of the shared covariance is solved
/// directly, with the same ridge escalation as the model fit when singular.
pub fn discriminant(
    x: &[f64],
    observed: &[usize],
    model: &DiscriminantModel,
) -> Result<DiscriminantResult> {
    let d = model.sigma.nrows();
    if x.len() != d {
        return Err(Error::InvalidInput(format!(
            "observation has length {}, model dimension is {d}",
            x.len()
        )));
    }
    if observed.is_empty() {
        return Err(Error::InvalidInput(
            "observation has an empty observed set".into(),
        ));
    }
    if observed.iter().any(|&j| j >= d) {
        return Err(Error::InvalidInput("observed index out of range".into()));
    }
    let a = observed.len();
    let sigma_aa = DMatrix::from_fn(a, a, |i, j| model.sigma[(observed[i], observed[j])]);
    let (inv, ridge_used) = invert_with_ridge(&sigma_aa)?;
    let x_a = DVector::from_fn(a, |i, _| x[observed[i]]);
    let mut delta = [0.0; 2];
    for (r, score) in delta.iter_mut().enumerate() {
        let mu_a = DVector::from_fn(a, |i, _| model.mu[r][observed[i]]);
        let w = &inv * &mu_a;
        *score = x_a.dot(&w) - 0.5 * mu_a.dot(&w);
    }
    let class = usize::from(!(delta[0] > delta[1]));
    Ok(DiscriminantResult {
        delta,
        class,
        ridge_used,
    })
}

/// Discriminant evaluation of one dataset row.
pub fn discriminant_row(
    data: &MaskedDataset,
    row: usize,
    model: &DiscriminantModel,
) -> Result<DiscriminantResult> {
    let x: Vec<f64> = (0..data.n_cols())
        .map(|j| {
            if data.is_observed(row, j) {
                data.values()[(row, j)]
            } else {
                0.0
            }
        })
        .collect();
    let observed = data.mask().observed_indices(row);
    discriminant(&x, &observed, model)
}

/// Stratified train/test split preserving class proportions within
/// rounding. Returns (train_rows, test_rows); both contain both classes.
fn stratified_split(
    labels: &[usize],
    train_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..2 {
        let mut rows = class_rows(labels, class);
        rows.shuffle(rng);
        let n_train = ((rows.len() as f64) * train_fraction).round() as usize;
        let n_train = n_train.clamp(1, rows.len().saturating_sub(1).max(1));
        if rows.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "class {} too small to split",
                class + 1
            )));
        }
        train.extend_from_slice(&rows[..n_train]);
        test.extend_from_slice(&rows[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Options for repeated-split evaluation.
#[derive(Debug, Clone)]
pub struct EvaluateConfig {
    pub k: usize,
    pub strategy: CovStrategy,
    pub penalty: PenaltyChoice,
    pub repeats: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub t_scheme: TScheme,
}

impl EvaluateConfig {
    pub fn new(k: usize, strategy: CovStrategy, penalty: PenaltyChoice, seed: u64) -> Self {
        Self {
            k,
            strategy,
            penalty,
            repeats: 20,
            train_fraction: 5.0 / 6.0,
            seed,
            t_scheme: TScheme::Welch,
        }
    }
}

/// Repeated stratified-split evaluation: per repeat, select features on the
/// training rows, fit the discriminant model, classify the held-out rows
/// and record per-class correct rates. Averages are reported across repeats.
pub fn evaluate(
    data: &MaskedDataset,
    labels: &[usize],
    cfg: &EvaluateConfig,
) -> Result<EvaluationReport> {
    validate_labels(data, labels)?;
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(Error::InvalidInput(
            "train fraction must lie in (0, 1)".into(),
        ));
    }
    if cfg.repeats < 1 {
        return Err(Error::InvalidInput("repeats must be at least 1".into()));
    }
    let mut per_repeat = Vec::with_capacity(cfg.repeats);
    for rep in 0..cfg.repeats {
        let outcome = run_repeat(data, labels, cfg, rep)?;
        per_repeat.push(outcome);
    }
    let class_pct = [
        per_repeat.iter().map(|r| r.class_pct[0]).sum::<f64>() / cfg.repeats as f64,
        per_repeat.iter().map(|r| r.class_pct[1]).sum::<f64>() / cfg.repeats as f64,
    ];
    let overall_pct =
        per_repeat.iter().map(|r| r.overall_pct).sum::<f64>() / cfg.repeats as f64;
    Ok(EvaluationReport {
        class_pct,
        overall_pct,
        repeats: cfg.repeats,
        per_repeat,
    })
}

fn run_repeat(
    data: &MaskedDataset,
    labels: &[usize],
    cfg: &EvaluateConfig,
    rep: usize,
) -> Result<RepeatOutcome> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(crate::simgen::derive_seed(cfg.seed, &[rep as u64]));
    // resample the split (seeded) if restriction to the selected features
    // empties a class
    for _attempt in 0..16 {
        let (train_rows, test_rows) = stratified_split(labels, cfg.train_fraction, &mut rng)?;
        let train = data.select_rows(&train_rows)?;
        let train_labels: Vec<usize> = train_rows.iter().map(|&i| labels[i]).collect();
        let features = t_select_with(&train, &train_labels, cfg.k, cfg.t_scheme)?;
        let (train_sel, train_dropped) = train.select_columns(&features)?;
        let train_sel_labels: Vec<usize> = train_rows
            .iter()
            .enumerate()
            .filter(|(i, _)| !train_dropped.contains(i))
            .map(|(_, &row)| labels[row])
            .collect();
        if !(train_sel_labels.contains(&0) && train_sel_labels.contains(&1)) {
            continue;
        }
        let model = fit_lda(&train_sel, &train_sel_labels, cfg.strategy, &cfg.penalty)?;
        let mut correct = [0usize; 2];
        let mut totals = [0usize; 2];
        for &row in &test_rows {
            let label = labels[row];
            let x: Vec<f64> = features
                .iter()
                .map(|&j| {
                    if data.is_observed(row, j) {
                        data.values()[(row, j)]
                    } else {
                        0.0
                    }
                })
                .collect();
            let observed: Vec<usize> = features
                .iter()
                .enumerate()
                .filter(|(_, &j)| data.is_observed(row, j))
                .map(|(local, _)| local)
                .collect();
            if observed.is_empty() {
                // no selected feature observed; the observation cannot be
                // scored and is excluded
                continue;
            }
            totals[label] += 1;
            let res = discriminant(&x, &observed, &model)?;
            if res.class == label {
                correct[label] += 1;
            }
        }
        if totals[0] == 0 || totals[1] == 0 {
            continue;
        }
        let class_pct = [
            100.0 * correct[0] as f64 / totals[0] as f64,
            100.0 * correct[1] as f64 / totals[1] as f64,
        ];
        let overall_pct =
            100.0 * (correct[0] + correct[1]) as f64 / (totals[0] + totals[1]) as f64;
        return Ok(RepeatOutcome {
            class_pct,
            overall_pct,
        });
    }
    Err(Error::Numerical(
        "could not produce a usable split after 16 attempts".into(),
    ))
}

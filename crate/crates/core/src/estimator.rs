//! Available-case means and the re-normalized pairwise sample covariance.
//!
//! Each covariance entry is averaged over only the rows where both
//! components are observed, centered by the global available-case means and
//! divided by the co-observation count |n(l,m)| (not |n(l,m)| - 1). Pairs
//! that are never co-observed are set to zero and recorded. The naive
//! baseline treats structural zeros as literal 0 values and computes the
//! ordinary divisor-n covariance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mask::{pairwise_counts, CoObservationCounts, ObservationMask};

/// Sentinel stored at unobserved positions.
pub const NA: f64 = f64::NAN;

/// An n x d value matrix paired with its structural-zero mask.
///
/// Values at masked positions are ignored by every estimator and stored as
/// NaN regardless of what the caller supplied.
#[derive(Debug, Clone)]
pub struct MaskedDataset {
    values: DMatrix<f64>,
    mask: ObservationMask,
}

impl MaskedDataset {
    pub fn new(mut values: DMatrix<f64>, mask: ObservationMask) -> Result<Self> {
        if values.nrows() != mask.n_rows() || values.ncols() != mask.n_cols() {
            return Err(Error::InvalidInput(format!(
                "values are {}x{} but mask is {}x{}",
                values.nrows(),
                values.ncols(),
                mask.n_rows(),
                mask.n_cols()
            )));
        }
        for i in 0..values.nrows() {
            for j in 0..values.ncols() {
                if mask.is_observed(i, j) {
                    if !values[(i, j)].is_finite() {
                        return Err(Error::InvalidInput(format!(
                            "non-finite value at observed position ({i}, {j})"
                        )));
                    }
                } else {
                    values[(i, j)] = NA;
                }
            }
        }
        Ok(Self { values, mask })
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn mask(&self) -> &ObservationMask {
        &self.mask
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask.is_observed(i, j)
    }

    /// Dataset restricted to the given rows.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let values = DMatrix::from_fn(rows.len(), self.n_cols(), |i, j| {
            self.values[(rows[i], j)]
        });
        let mask = self.mask.select_rows(rows)?;
        Self::new(values, mask)
    }

    /// Dataset restricted to the given columns. Rows whose observed set
    /// becomes empty are dropped; their original indices are returned.
    pub fn select_columns(&self, cols: &[usize]) -> Result<(Self, Vec<usize>)> {
        let kept: Vec<usize> = (0..self.n_rows())
            .filter(|&i| cols.iter().any(|&j| self.is_observed(i, j)))
            .collect();
        let dropped = (0..self.n_rows()).filter(|i| !kept.contains(i)).collect();
        if kept.is_empty() {
            return Err(Error::InvalidInput(
                "column selection leaves no non-empty rows".into(),
            ));
        }
        let values = DMatrix::from_fn(kept.len(), cols.len(), |i, j| {
            self.values[(kept[i], cols[j])]
        });
        let mask_entries = nalgebra::DMatrix::from_fn(kept.len(), cols.len(), |i, j| {
            self.mask.entries()[(kept[i], cols[j])]
        });
        let mask = ObservationMask::new(mask_entries)?;
        Ok((Self::new(values, mask)?, dropped))
    }
}

/// Symmetric d x d covariance estimate with its co-observation counts.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    sigma: DMatrix<f64>,
    counts: CoObservationCounts,
    /// Unordered pairs (l, m), l < m, forced to zero for lack of
    /// co-observation.
    zeroed_pairs: Vec<(usize, usize)>,
}

impl CovarianceEstimate {
    pub fn from_parts(
        sigma: DMatrix<f64>,
        counts: CoObservationCounts,
        zeroed_pairs: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if sigma.nrows() != sigma.ncols() {
            return Err(Error::InvalidInput("covariance must be square".into()));
        }
        if sigma != sigma.transpose() {
            return Err(Error::InvalidInput("covariance must be symmetric".into()));
        }
        Ok(Self {
            sigma,
            counts,
            zeroed_pairs,
        })
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn counts(&self) -> &CoObservationCounts {
        &self.counts
    }

    pub fn zeroed_pairs(&self) -> &[(usize, usize)] {
        &self.zeroed_pairs
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    /// Same counts and bookkeeping, new entries.
    pub(crate) fn with_sigma(&self, sigma: DMatrix<f64>) -> Self {
        Self {
            sigma,
            counts: self.counts.clone(),
            zeroed_pairs: self.zeroed_pairs.clone(),
        }
    }
}

/// Available-case mean of each column: the average over the rows where that
/// column is observed. Never-observed columns get 0 with a warning.
pub fn available_means(data: &MaskedDataset) -> DVector<f64> {
    let d = data.n_cols();
    let mut mu = DVector::zeros(d);
    for l in 0..d {
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..data.n_rows() {
            if data.is_observed(i, l) {
                sum += data.values()[(i, l)];
                count += 1;
            }
        }
        if count == 0 {
            log::warn!("column {l} is never observed; its mean defaults to 0");
            mu[l] = 0.0;
        } else {
            mu[l] = sum / count as f64;
        }
    }
    mu
}

/// Re-normalized pairwise sample covariance.
///
/// sigma[l][m] = sum over co-observed rows of (x_il - mu_l)(x_im - mu_m),
/// divided by |n(l,m)|. Entries with no co-observed rows become 0 and the
/// pair is recorded.
pub fn renormalized_covariance(data: &MaskedDataset) -> CovarianceEstimate {
    let d = data.n_cols();
    let counts = pairwise_counts(data.mask());
    let mu = available_means(data);
    let mut sigma = DMatrix::zeros(d, d);
    let mut zeroed = Vec::new();
    for l in 0..d {
        for m in l..d {
            let count = counts.pair(l, m);
            if count == 0 {
                if l != m {
                    zeroed.push((l, m));
                }
                continue;
            }
            let mut sum = 0.0;
            for i in 0..data.n_rows() {
                if data.is_observed(i, l) && data.is_observed(i, m) {
                    sum += (data.values()[(i, l)] - mu[l]) * (data.values()[(i, m)] - mu[m]);
                }
            }
            let v = sum / count as f64;
            sigma[(l, m)] = v;
            sigma[(m, l)] = v;
        }
    }
    CovarianceEstimate {
        sigma,
        counts,
        zeroed_pairs: zeroed,
    }
}

/// Baseline that conflates structural zeros with the value 0: ordinary
/// divisor-n sample covariance of the zero-filled matrix. Counts are the
/// full row count for every pair since nothing is treated as missing.
pub fn naive_covariance(data: &MaskedDataset) -> CovarianceEstimate {
    let (n, d) = (data.n_rows(), data.n_cols());
    let filled = DMatrix::from_fn(n, d, |i, j| {
        if data.is_observed(i, j) {
            data.values()[(i, j)]
        } else {
            0.0
        }
    });
    let mut mu = DVector::zeros(d);
    for j in 0..d {
        mu[j] = filled.column(j).sum() / n as f64;
    }
    let mut sigma = DMatrix::zeros(d, d);
    for l in 0..d {
        for m in l..d {
            let mut sum = 0.0;
            for i in 0..n {
                sum += (filled[(i, l)] - mu[l]) * (filled[(i, m)] - mu[m]);
            }
            let v = sum / n as f64;
            sigma[(l, m)] = v;
            sigma[(m, l)] = v;
        }
    }
    let all_ones = ObservationMask::new(DMatrix::from_element(n, d, 1u8))
        .expect("all-ones mask is always valid");
    CovarianceEstimate {
        sigma,
        counts: pairwise_counts(&all_ones),
        zeroed_pairs: Vec::new(),
    }
}

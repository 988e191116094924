//! Structural-zero observation patterns.
//!
//! An [`ObservationMask`] records which components of each observation are
//! truly present. Pairwise co-observation counts drive the re-normalized
//! covariance estimator, and the (A1) diagnostic flags component pairs that
//! are co-observed too rarely for pairwise estimation to be reliable.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// n x d binary matrix; 1 = observed, 0 = structural zero.
///
/// All-zero rows are rejected: an empty observed index set corresponds to no
/// observation at all and every downstream formula conditions on a nonempty
/// index set.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMask {
    entries: DMatrix<u8>,
}

impl ObservationMask {
    pub fn new(entries: DMatrix<u8>) -> Result<Self> {
        for v in entries.iter() {
            if *v > 1 {
                return Err(Error::InvalidInput(format!(
                    "mask entries must be 0 or 1, found {v}"
                )));
            }
        }
        for i in 0..entries.nrows() {
            if (0..entries.ncols()).all(|j| entries[(i, j)] == 0) {
                return Err(Error::InvalidInput(format!(
                    "mask row {i} is all-zero (empty observation)"
                )));
            }
        }
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::InvalidInput("mask must be non-empty".into()));
        }
        Ok(Self { entries })
    }

    pub fn n_rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.entries[(row, col)] == 1
    }

    pub fn entries(&self) -> &DMatrix<u8> {
        &self.entries
    }

    /// Indices of the observed components of one row (always nonempty).
    pub fn observed_indices(&self, row: usize) -> Vec<usize> {
        (0..self.n_cols())
            .filter(|&j| self.is_observed(row, j))
            .collect()
    }

    /// Mask restricted to the given rows.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let entries = DMatrix::from_fn(rows.len(), self.n_cols(), |i, j| {
            self.entries[(rows[i], j)]
        });
        Self::new(entries)
    }
}

/// Per-component and per-pair observation counts |n(l)| and |n(l,m)|.
#[derive(Debug, Clone, PartialEq)]
pub struct CoObservationCounts {
    pair_counts: DMatrix<usize>,
    singleton_counts: Vec<usize>,
    n_rows: usize,
}

impl CoObservationCounts {
    pub fn pair(&self, l: usize, m: usize) -> usize {
        self.pair_counts[(l, m)]
    }

    pub fn singleton(&self, l: usize) -> usize {
        self.singleton_counts[l]
    }

    pub fn pair_counts(&self) -> &DMatrix<usize> {
        &self.pair_counts
    }

    pub fn singleton_counts(&self) -> &[usize] {
        &self.singleton_counts
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn dim(&self) -> usize {
        self.singleton_counts.len()
    }
}

/// |n(l,m)| = #{i : both l and m observed in row i}, |n(l)| on the diagonal.
pub fn pairwise_counts(mask: &ObservationMask) -> CoObservationCounts {
    let (n, d) = (mask.n_rows(), mask.n_cols());
    let mut pair = DMatrix::zeros(d, d);
    for i in 0..n {
        let obs = mask.observed_indices(i);
        for (a, &l) in obs.iter().enumerate() {
            for &m in &obs[a..] {
                pair[(l, m)] += 1;
                if l != m {
                    pair[(m, l)] += 1;
                }
            }
        }
    }
    let singleton = (0..d).map(|l| pair[(l, l)]).collect();
    CoObservationCounts {
        pair_counts: pair,
        singleton_counts: singleton,
        n_rows: n,
    }
}

/// Diagnostic for the co-observation condition (A1).
#[derive(Debug, Clone)]
pub struct A1Report {
    /// Unordered pairs (l, m), l <= m, whose empirical co-observation
    /// fraction falls below the threshold.
    pub failing_pairs: Vec<(usize, usize)>,
    pub pass: bool,
    pub min_fraction: f64,
}

/// Flags component pairs with pair_counts/n below `min_fraction`.
///
/// The population quantity delta(l,m) of (A1) is unknowable from data; the
/// empirical fraction is the proxy and the threshold is user-chosen.
pub fn check_a1(counts: &CoObservationCounts, min_fraction: f64) -> Result<A1Report> {
    if !(min_fraction > 0.0 && min_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "min_fraction must lie in (0, 1), got {min_fraction}"
        )));
    }
    let n = counts.n_rows() as f64;
    let d = counts.dim();
    let mut failing = Vec::new();
    for l in 0..d {
        for m in l..d {
            if (counts.pair(l, m) as f64) / n < min_fraction {
                failing.push((l, m));
            }
        }
    }
    Ok(A1Report {
        pass: failing.is_empty(),
        failing_pairs: failing,
        min_fraction,
    })
}

/// Per-component missingness probabilities rho_j in [0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct MaskDistribution {
    rho: Vec<f64>,
}

impl MaskDistribution {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        for (j, &r) in rho.iter().enumerate() {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::InvalidInput(format!(
                    "rho[{j}] = {r} outside [0, 1)"
                )));
            }
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.len()
    }
}

/// Draws each rho_j independently uniform on (lo, hi).
pub fn sample_rho(d: usize, lo: f64, hi: f64, seed: u64) -> Result<MaskDistribution> {
    if !(0.0 <= lo && lo < hi && hi < 1.0) {
        return Err(Error::InvalidInput(format!(
            "rho range must satisfy 0 <= lo < hi < 1, got ({lo}, {hi})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = (0..d).map(|_| rng.random_range(lo..hi)).collect();
    MaskDistribution::new(rho)
}

/// Samples an n x d mask with entries Bernoulli(1 - rho_j), independent over
/// i and j. Rows that come out all-zero are resampled so every observation
/// has a nonempty index set.
pub fn generate_mask(
    n: usize,
    d: usize,
    dist: &MaskDistribution,
    seed: u64,
) -> Result<ObservationMask> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidInput("mask dimensions must be positive".into()));
    }
    if dist.dim() != d {
        return Err(Error::InvalidInput(format!(
            "distribution has dimension {}, expected {d}",
            dist.dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = DMatrix::zeros(n, d);
    for i in 0..n {
        loop {
            let mut any = false;
            for j in 0..d {
                let obs = rng.random::<f64>() >= dist.rho()[j];
                entries[(i, j)] = obs as u8;
                any |= obs;
            }
            if any {
                break;
            }
        }
    }
    ObservationMask::new(entries)
}

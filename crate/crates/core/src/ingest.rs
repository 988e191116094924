//! Taxa count tables and the log-ratio transform.
//!
//! Counts of zero are structural: the taxon is absent from the specimen, so
//! the transformed entry is NA rather than an imputed small value. The
//! reference taxon must be present in every sample and becomes the
//! denominator of each log ratio.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimator::MaskedDataset;
use crate::mask::ObservationMask;

/// n x (d+1) nonnegative integer count matrix with taxa labels and an
/// optional per-row group label.
#[derive(Debug, Clone)]
pub struct CountTable {
    counts: DMatrix<u64>,
    taxa_names: Vec<String>,
    group_labels: Option<Vec<String>>,
}

impl CountTable {
    pub fn new(
        counts: DMatrix<u64>,
        taxa_names: Vec<String>,
        group_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if taxa_names.len() != counts.ncols() {
            return Err(Error::InvalidInput(format!(
                "{} taxa names for {} count columns",
                taxa_names.len(),
                counts.ncols()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &taxa_names {
            if !seen.insert(name) {
                return Err(Error::InvalidInput(format!("duplicate taxon name '{name}'")));
            }
        }
        if let Some(groups) = &group_labels {
            if groups.len() != counts.nrows() {
                return Err(Error::InvalidInput(format!(
                    "{} group labels for {} rows",
                    groups.len(),
                    counts.nrows()
                )));
            }
        }
        Ok(Self {
            counts,
            taxa_names,
            group_labels,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.counts.nrows()
    }

    pub fn n_taxa(&self) -> usize {
        self.counts.ncols()
    }

    pub fn counts(&self) -> &DMatrix<u64> {
        &self.counts
    }

    pub fn taxa_names(&self) -> &[String] {
        &self.taxa_names
    }

    pub fn group_labels(&self) -> Option<&[String]> {
        self.group_labels.as_deref()
    }

    pub fn taxon_index(&self, name: &str) -> Option<usize> {
        self.taxa_names.iter().position(|t| t == name)
    }

    /// Fraction of samples in which each taxon has a nonzero count.
    pub fn prevalence(&self, taxon: usize) -> f64 {
        let nonzero = (0..self.n_samples())
            .filter(|&i| self.counts[(i, taxon)] > 0)
            .count();
        nonzero as f64 / self.n_samples() as f64
    }
}

/// A validated reference taxon: strictly positive count in every sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceChoice {
    pub index: usize,
}

/// Keeps exactly the taxa whose nonzero-count fraction is at least
/// `min_fraction`. A valid reference taxon has prevalence 1 and therefore
/// always survives. Row count is unchanged.
pub fn prevalence_filter(table: &CountTable, min_fraction: f64) -> Result<CountTable> {
    if !(min_fraction > 0.0 && min_fraction <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "min_fraction must lie in (0, 1], got {min_fraction}"
        )));
    }
    let kept: Vec<usize> = (0..table.n_taxa())
        .filter(|&j| table.prevalence(j) >= min_fraction)
        .collect();
    let counts = DMatrix::from_fn(table.n_samples(), kept.len(), |i, j| {
        table.counts[(i, kept[j])]
    });
    let names = kept.iter().map(|&j| table.taxa_names[j].clone()).collect();
    CountTable::new(counts, names, table.group_labels.clone())
}

/// Accepts `index` as the reference taxon iff its count is positive in
/// every sample; the first offending row is named otherwise.
pub fn validate_reference(table: &CountTable, index: usize) -> Result<ReferenceChoice> {
    if index >= table.n_taxa() {
        return Err(Error::InvalidInput(format!(
            "reference index {index} out of range for {} taxa",
            table.n_taxa()
        )));
    }
    for i in 0..table.n_samples() {
        if table.counts[(i, index)] == 0 {
            return Err(Error::InvalidInput(format!(
                "taxon '{}' cannot be the reference: count is zero in row {i}",
                table.taxa_names[index]
            )));
        }
    }
    Ok(ReferenceChoice { index })
}

/// Output of the log-ratio transform.
#[derive(Debug, Clone)]
pub struct LogRatioResult {
    pub data: MaskedDataset,
    /// Names of the d retained (non-reference) taxa, in column order.
    pub taxa_names: Vec<String>,
    /// Group labels for the retained rows, if the table had them.
    pub group_labels: Option<Vec<String>>,
    /// Original row indices dropped because only the reference was nonzero.
    pub dropped_rows: Vec<usize>,
}

/// X_ij = ln(count_ij / ref_count_i) when count_ij > 0, NA otherwise. The
/// reference column is dropped. Rows where every non-reference count is zero
/// have an empty observed set and are dropped with a warning.
pub fn log_ratio_transform(table: &CountTable, reference: ReferenceChoice) -> Result<LogRatioResult> {
    let r = reference.index;
    validate_reference(table, r)?;
    let cols: Vec<usize> = (0..table.n_taxa()).filter(|&j| j != r).collect();
    let kept_rows: Vec<usize> = (0..table.n_samples())
        .filter(|&i| cols.iter().any(|&j| table.counts[(i, j)] > 0))
        .collect();
    let dropped_rows: Vec<usize> = (0..table.n_samples())
        .filter(|i| !kept_rows.contains(i))
        .collect();
    for &i in &dropped_rows {
        log::warn!("row {i} has only the reference taxon present; dropping it");
    }
    if kept_rows.is_empty() {
        return Err(Error::InvalidInput(
            "every row has only the reference taxon present".into(),
        ));
    }
    let n = kept_rows.len();
    let d = cols.len();
    let mut values = DMatrix::zeros(n, d);
    let mut mask = DMatrix::zeros(n, d);
    for (out_i, &i) in kept_rows.iter().enumerate() {
        let ref_count = table.counts[(i, r)] as f64;
        for (out_j, &j) in cols.iter().enumerate() {
            let c = table.counts[(i, j)];
            if c > 0 {
                values[(out_i, out_j)] = (c as f64 / ref_count).ln();
                mask[(out_i, out_j)] = 1;
            }
        }
    }
    let data = MaskedDataset::new(values, ObservationMask::new(mask)?)?;
    let taxa_names = cols.iter().map(|&j| table.taxa_names[j].clone()).collect();
    let group_labels = table
        .group_labels
        .as_ref()
        .map(|g| kept_rows.iter().map(|&i| g[i].clone()).collect());
    Ok(LogRatioResult {
        data,
        taxa_names,
        group_labels,
        dropped_rows,
    })
}

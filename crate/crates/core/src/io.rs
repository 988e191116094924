//! CSV interchange and run manifests.
//!
//! All matrices travel as dense CSV with a header row. Masked datasets use
//! the literal token `NA` for structural zeros; masks are 0/1 integers.
//! Count tables may carry an optional `group` column with per-row labels.
//! Output files are written to a temporary file in the destination
//! directory and renamed into place.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimator::MaskedDataset;
use crate::ingest::CountTable;
use crate::mask::ObservationMask;
use crate::simgen::ExperimentRow;

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| parse_err(path, e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(path, e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e.to_string()))?;
        let row: Vec<String> = record.iter().map(|s| s.trim().to_string()).collect();
        if row.len() != header.len() {
            return Err(parse_err(
                path,
                format!(
                    "row {} has {} fields, header has {}",
                    i + 1,
                    row.len(),
                    header.len()
                ),
            ));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, "no data rows"));
    }
    Ok((header, rows))
}

/// Reads a masked dataset: header of component names, body of reals with
/// `NA` marking structural zeros.
pub fn read_dataset(path: &Path) -> Result<(MaskedDataset, Vec<String>)> {
    let (header, rows) = read_rows(path)?;
    let n = rows.len();
    let d = header.len();
    let mut values = DMatrix::zeros(n, d);
    let mut mask = DMatrix::zeros(n, d);
    for (i, row) in rows.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if cell.eq_ignore_ascii_case("na") {
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(path, format!("non-numeric cell '{cell}' at row {}, column {}", i + 1, j + 1)))?;
            values[(i, j)] = v;
            mask[(i, j)] = 1;
        }
    }
    let mask = ObservationMask::new(mask)?;
    Ok((MaskedDataset::new(values, mask)?, header))
}

/// Writes a masked dataset with `NA` at unobserved positions.
pub fn write_dataset(path: &Path, data: &MaskedDataset, names: &[String]) -> Result<()> {
    let mut lines = vec![names.join(",")];
    for i in 0..data.n_rows() {
        let row: Vec<String> = (0..data.n_cols())
            .map(|j| {
                if data.is_observed(i, j) {
                    format!("{}", data.values()[(i, j)])
                } else {
                    "NA".to_string()
                }
            })
            .collect();
        lines.push(row.join(","));
    }
    write_atomic(path, &(lines.join("\n") + "\n"))
}

/// Writes a mask as 0/1 integers under the component names.
pub fn write_mask(path: &Path, mask: &ObservationMask, names: &[String]) -> Result<()> {
    let mut lines = vec![names.join(",")];
    for i in 0..mask.n_rows() {
        let row: Vec<String> = (0..mask.n_cols())
            .map(|j| u8::from(mask.is_observed(i, j)).to_string())
            .collect();
        lines.push(row.join(","));
    }
    write_atomic(path, &(lines.join("\n") + "\n"))
}

/// Reads a dense numeric matrix with a header row.
pub fn read_matrix(path: &Path) -> Result<(DMatrix<f64>, Vec<String>)> {
    let (header, rows) = read_rows(path)?;
    let mut m = DMatrix::zeros(rows.len(), header.len());
    for (i, row) in rows.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            m[(i, j)] = cell
                .parse()
                .map_err(|_| parse_err(path, format!("non-numeric cell '{cell}' at row {}, column {}", i + 1, j + 1)))?;
        }
    }
    Ok((m, header))
}

/// Writes a dense matrix with a header row of column names.
pub fn write_matrix(path: &Path, matrix: &DMatrix<f64>, names: &[String]) -> Result<()> {
    if names.len() != matrix.ncols() {
        return Err(Error::InvalidInput(format!(
            "{} column names for {} columns",
            names.len(),
            matrix.ncols()
        )));
    }
    let mut lines = vec![names.join(",")];
    for i in 0..matrix.nrows() {
        let row: Vec<String> = (0..matrix.ncols())
            .map(|j| format!("{}", matrix[(i, j)]))
            .collect();
        lines.push(row.join(","));
    }
    write_atomic(path, &(lines.join("\n") + "\n"))
}

/// Reads a count table: header of taxa names (an optional `group` column
/// carries per-row labels), body of nonnegative integers.
pub fn read_count_table(path: &Path) -> Result<CountTable> {
    let (header, rows) = read_rows(path)?;
    let group_col = header.iter().position(|h| h == "group");
    let taxa_cols: Vec<usize> = (0..header.len()).filter(|&j| Some(j) != group_col).collect();
    let n = rows.len();
    let mut counts = DMatrix::zeros(n, taxa_cols.len());
    for (i, row) in rows.iter().enumerate() {
        for (out_j, &j) in taxa_cols.iter().enumerate() {
            let cell = &row[j];
            let v: u64 = cell.parse().map_err(|_| {
                parse_err(
                    path,
                    format!("count cell '{cell}' at row {}, column '{}' is not a nonnegative integer", i + 1, header[j]),
                )
            })?;
            counts[(i, out_j)] = v;
        }
    }
    let taxa_names = taxa_cols.iter().map(|&j| header[j].clone()).collect();
    let groups = group_col.map(|g| rows.iter().map(|r| r[g].clone()).collect());
    CountTable::new(counts, taxa_names, groups)
}

/// Writes the simulation result table.
pub fn write_experiment_rows(path: &Path, rows: &[ExperimentRow]) -> Result<()> {
    let mut lines = vec!["kind,estimator,n,d,rep,seed,spectral_error,n_over_logd".to_string()];
    for r in rows {
        lines.push(format!(
            "{},{},{},{},{},{},{},{}",
            r.kind, r.estimator, r.n, r.d, r.rep, r.seed, r.spectral_error, r.n_over_logd
        ));
    }
    write_atomic(path, &(lines.join("\n") + "\n"))
}

/// Writes a cross-validation loss curve as (penalty, mean_loss).
pub fn write_loss_curve(path: &Path, curve: &[(f64, f64)]) -> Result<()> {
    let mut lines = vec!["penalty,mean_loss".to_string()];
    for &(p, l) in curve {
        lines.push(format!("{p},{l}"));
    }
    write_atomic(path, &(lines.join("\n") + "\n"))
}

/// Serializes `manifest` as pretty JSON next to the run outputs.
pub fn write_manifest(path: &Path, manifest: &serde_json::Value) -> Result<()> {
    let body = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::InvalidInput(format!("manifest serialization failed: {e}")))?;
    write_atomic(path, &(body + "\n"))
}

/// Write-temp-then-rename so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir: PathBuf = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let tmp = tempfile::NamedTempFile::new_in(&dir)?;
    std::fs::write(tmp.path(), contents)?;
    tmp.persist(path)
        .map_err(|e| Error::Io(e.error))?;
    Ok(())
}

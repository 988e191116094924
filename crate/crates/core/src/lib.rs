//! Sparse covariance and precision matrix estimation for data with
//! structural zeros.
//!
//! Structural zeros are components that are truly absent from an
//! observation (a taxon not present in a specimen), not hidden values. The
//! observed subvector of each sample is modeled conditionally on its
//! observed index set, covariance entries are estimated pairwise over
//! co-observed rows, and sparse estimates are obtained by generalized
//! thresholding (covariance) or constrained l1 minimization (precision).
//! Supporting modules cover graph-model simulation, taxa-count ingestion
//! via the log-ratio transform, penalty tuning by cross validation and
//! discriminant classification on observed subvectors.

pub mod classify;
pub mod clime;
pub mod error;
pub mod estimator;
pub mod ingest;
pub mod io;
pub mod mask;
pub mod metrics;
pub mod simgen;
pub mod threshold;
pub mod tuning;

pub use error::{Error, Result};

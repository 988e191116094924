use std::path::PathBuf;

/// Error type shared across the crate.
///
/// The variants map onto the CLI exit codes: invalid input and parse
/// failures exit with 2, numerical failures with 3 and infeasible
/// optimization programs with 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Iterative routine stopped at the iteration cap; carries the best
    /// estimate reached so callers can still inspect it.
    #[error("did not converge after {iterations} iterations (best estimate {best})")]
    NonConvergence { best: f64, iterations: usize },

    /// The constrained program has an empty feasible set at the requested
    /// penalty. `min_residual` is the smallest achievable constraint
    /// residual, so callers know how far off the penalty was.
    #[error("infeasible program for column {column}: requested bound {requested}, minimal achievable residual {min_residual}")]
    Infeasible {
        column: usize,
        requested: f64,
        min_residual: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// CLI exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Parse { .. } => 2,
            Error::Numerical(_) | Error::NonConvergence { .. } => 3,
            Error::Infeasible { .. } => 4,
            Error::Io(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

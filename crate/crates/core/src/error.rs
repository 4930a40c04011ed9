use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or non-finite sample data.
    #[error("data error: {0}")]
    Data(String),

    /// A value fell outside the grid's `[0, kmax]` range.
    #[error("value {value} is outside [0, {kmax}]")]
    Range { value: f64, kmax: f64 },

    /// A value that should sit on the grid does not.
    #[error("value {value} is not a multiple of d = {d}")]
    NotQuantized { value: f64, d: f64 },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("{path}: line {line}: {msg}")]
    Csv { path: String, line: u64, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    /// Iteration cap hit; `best` holds the last feasible iterate.
    #[error("no convergence after {iterations} iterations (kkt residual {kkt_residual:e})")]
    NonConvergence {
        iterations: usize,
        kkt_residual: f64,
        best: Vec<f64>,
    },

    /// Invariant violation inside the numerical code.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than I/O or numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Data(_)
                | Error::Range { .. }
                | Error::NotQuantized { .. }
                | Error::Invalid(_)
                | Error::LengthMismatch { .. }
                | Error::Csv { .. }
                | Error::Json { .. }
        )
    }
}

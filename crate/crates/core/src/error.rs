use thiserror::Error;

/// Errors raised by the library.
///
/// The CLI maps [`Error::is_argument`] failures to exit code 1 and every other
/// variant to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("series did not converge after {terms} terms")]
    NonConvergence { terms: usize },

    #[error("catastrophic cancellation: estimated relative error {estimate:e}")]
    Cancellation { estimate: f64 },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("column {column}: {message}")]
    Column { column: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// True for failures caused by bad caller input rather than by a computation.
    pub fn is_argument(&self) -> bool {
        matches!(
            self,
            Error::Argument(_)
                | Error::DimensionMismatch { .. }
                | Error::Unsupported(_)
                | Error::Parse { .. }
                | Error::Column { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or matrix dimensions do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Input violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A metric has no defined value (empty mask, zero denominator, single-class labels).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// CSV ingestion failed.
    #[error("csv error in {path}: {message}")]
    Csv { path: String, message: String },

    /// Experiment configuration rejected.
    #[error("config error: {0}")]
    Config(String),

    /// Model training aborted.
    #[error("training failed: {0}")]
    Training(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gradient contains non-finite entries")]
    InvalidGradient,

    #[error("direction is degenerate (gradient norm below threshold)")]
    DegenerateDirection,

    #[error("invalid proposal shape: {0}")]
    InvalidShape(String),

    #[error("covariance matrix is not symmetric positive definite")]
    InvalidCovariance,

    #[error("invalid GLM data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("starting point has non-finite log density")]
    InvalidStart,

    #[error("invalid run lengths: {0}")]
    InvalidRunLength(String),

    #[error("batch index must be >= 1, got {0}")]
    InvalidBatchIndex(u64),

    #[error("series is constant")]
    ConstantSeries,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("batch-means covariance estimate is singular")]
    SingularEstimate,

    #[error("basis completion lost rank")]
    OracleFailure,

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors raised while reading or validating an experiment config.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}

//! Crate-wide error type with a stable exit-code mapping for the CLI.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: missing columns, unparseable config, bad CSV shape.
    #[error("schema error: {0}")]
    Schema(String),

    /// Invalid argument to a library operation (dimension mismatch, empty
    /// dataset, index out of range, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A configuration routed target-domain data into training, background
    /// construction, or reference statistics.
    #[error("protocol violation: {0}")]
    Protocol(String),

    /// Numeric failure: divergent training, non-finite values.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code contract: 0 success, 2 input/schema error, 3 protocol
    /// violation, 4 numeric failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_) | Error::Invalid(_) | Error::Io { .. } | Error::Csv(_) => 2,
            Error::Protocol(_) => 3,
            Error::Numeric(_) => 4,
            Error::Json(_) => 2,
        }
    }
}

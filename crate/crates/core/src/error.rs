//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the data pipeline, the models and the evaluation code.
#[derive(Debug, Error)]
pub enum Error {
    /// A file does not match the expected column layout.
    #[error("schema error: {0}")]
    Schema(String),

    /// A record or argument violates a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A configuration value is out of range or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// Training or a numeric routine diverged (NaN loss, singular system, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A serialized model or report file could not be decoded.
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

use std::io;

use thiserror::Error;

pub type Result<T, E = IseError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum IseError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated payload: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("pixel value {value} at index {index} is outside [0, 1]")]
    PixelRange { index: usize, value: f32 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("empty support: {0}")]
    EmptySupport(String),

    #[error("action decode failed: {0}")]
    Decode(String),

    #[error("missing assets: {0}")]
    MissingAssets(String),
}

impl IseError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        IseError::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        IseError::InvalidArgument(msg.into())
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid path gain: {0}")]
    InvalidPath(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid bound parameters: {0}")]
    InvalidParams(String),

    #[error("invalid scheme: {0}")]
    Schedule(String),

    #[error("spectral density must be positive, got {value} at lambda = {lambda}")]
    NonPositiveDensity { lambda: f64, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

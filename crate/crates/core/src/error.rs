//! Error types shared across the pipeline stages.

use std::path::PathBuf;

/// Errors produced by pipeline stages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Network-level failure that a caller may retry (timeouts, 5xx after
    /// backoff, connection resets).
    #[error("transport error for {url}: {message}")]
    Transport { url: String, message: String },

    /// A response arrived but could not be parsed. The raw payload is
    /// attached so the failing record can be audited.
    #[error("parse error for {url}: {message}")]
    Parse {
        url: String,
        message: String,
        payload: String,
    },

    /// A required upstream artifact is missing; names the stage that
    /// produces it.
    #[error("{artifact} not found at {path}; run `facespan {stage}` first")]
    MissingArtifact {
        artifact: String,
        path: PathBuf,
        stage: String,
    },

    /// A pretrained weights asset named by the backbone adapter is absent.
    #[error("missing weights asset `{asset}` for backbone `{backbone}` (expected at {path}); see README for how to obtain and convert it")]
    MissingAsset {
        backbone: String,
        asset: String,
        path: PathBuf,
    },

    /// Configuration failed validation before any work started.
    #[error("invalid config: {0}")]
    Config(String),

    /// A contract between stages was violated (e.g. a filter-ordering bug).
    #[error("structural error: {0}")]
    Structural(String),

    /// Input data failed a precondition of an operation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Training diverged or could not proceed.
    #[error("training error: {0}")]
    Training(String),

    #[error("image error: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the failure is transient and the operation may be retried.
    pub fn is_retriable(&self) -> bool {
        matches!(self, Error::Transport { .. })
    }
}

use std::path::PathBuf;

use thiserror::Error;

use crate::store::tensor::TensorError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: (usize, usize), got: (usize, usize) },

    #[error("simulation became unstable at step {step}")]
    Unstable { step: usize },

    #[error("glyph placement failed after {attempts} attempts")]
    PlacementFailed { attempts: usize },

    #[error("IDX file {path}: {reason}")]
    Idx { path: PathBuf, reason: String },

    #[error("tensor file {path}: {source}")]
    Tensor {
        path: PathBuf,
        #[source]
        source: TensorError,
    },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("PNG encoding error: {0}")]
    Png(#[from] png::EncodingError),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

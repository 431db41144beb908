use std::path::PathBuf;

use thiserror::Error;

use crate::assoc::AssocError;
use crate::eval::EvalError;
use crate::fusion::FusionError;
use crate::model::ModelError;
use crate::store::StoreError;
use crate::turbsim::TurbError;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error; each module keeps its own narrower enum.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Turbulence(#[from] TurbError),
    #[error(transparent)]
    Assoc(#[from] AssocError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("missing detections: {0}")]
    MissingDetections(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("benchmark corpus missing: {0}")]
    CorpusMissing(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("image decode error for {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by the input data.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Store(StoreError::Io { .. }) => true,
            _ => false,
        }
    }
}

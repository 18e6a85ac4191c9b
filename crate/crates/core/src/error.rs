use std::path::PathBuf;

use thiserror::Error;

use crate::tensor::Mode;

#[derive(Error, Debug)]
pub enum MidasError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid mode {0}, expected 1, 2 or 3")]
    InvalidMode(usize),

    #[error("fiber index {index} out of range for mode {mode} (J = {limit})")]
    FiberOutOfRange { mode: Mode, index: usize, limit: usize },

    #[error("invalid fiber batch: {0}")]
    InvalidBatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("iterate diverged at iteration {iteration} (mode {mode}): {detail}")]
    Diverged {
        iteration: u64,
        mode: Mode,
        detail: String,
    },

    #[error("tensor has negative entries; multiplicative updates need X >= 0")]
    NegativeTensor,

    #[error("estimator state not initialized: {0}")]
    Uninitialized(String),

    #[error("{path}: {message} (byte offset {offset})")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, MidasError>;

impl MidasError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MidasError::Io {
            path: path.into(),
            source,
        }
    }
}

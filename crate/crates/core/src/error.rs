use std::path::PathBuf;

use thiserror::Error;

use crate::tensor::TensorError;

/// Errors surfaced by the model, data, training and instrumentation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("data error: {0}")]
    Data(String),
    #[error("missing data files: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingFiles(Vec<PathBuf>),
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error("no answer: {0}")]
    NoAnswer(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("non-finite loss at batch {batch} (lr {lr})")]
    NonFiniteLoss { batch: usize, lr: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status: 1 usage, 2 data or format, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::NonFiniteLoss { .. } | Error::Tensor(TensorError::NonFinite { .. }) => 3,
            _ => 2,
        }
    }
}

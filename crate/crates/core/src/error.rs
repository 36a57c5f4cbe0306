use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in `{tensor}`: expected {expected}, got {got}")]
    Dimension {
        tensor: String,
        expected: String,
        got: String,
    },

    #[error("empty candidate set")]
    EmptyCandidates,

    #[error("backward called on an empty tape (no forward pass recorded)")]
    BackwardBeforeForward,

    #[error("backward requires a scalar loss, got {0} entries")]
    NonScalarLoss(usize),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("corpus parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("embedding file error at line {line}: {msg}")]
    Embedding { line: usize, msg: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn dim(tensor: impl Into<String>, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            tensor: tensor.into(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}

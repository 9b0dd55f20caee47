use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    Validation(String),

    /// The input is admissible but numerically degenerate (singular, tied, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Gram-Schmidt step `index` (1-based position in the input sequence)
    /// produced a vector of negligible norm.
    #[error("Gram-Schmidt degeneracy at vector {index}: projected norm {norm:e}")]
    GramSchmidt { index: usize, norm: f64 },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}

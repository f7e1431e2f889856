use thiserror::Error;

/// Errors raised while building problems, tables and series.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {actual})")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("index out of range: {what} {index} (size {size})")]
    Index {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("{0}")]
    Structure(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

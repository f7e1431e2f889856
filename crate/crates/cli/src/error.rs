use std::path::Path;

use thiserror::Error;

/// Failures of a command, mapped onto process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: config, flags or data files. Exit code 2.
    #[error("{0}")]
    User(String),
    /// Reading or writing files failed. Exit code 3.
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn user(msg: impl Into<String>) -> Self {
        CliError::User(msg.into())
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<robustq::Error> for CliError {
    fn from(err: robustq::Error) -> Self {
        CliError::User(err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

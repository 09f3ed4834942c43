use std::path::PathBuf;

use thiserror::Error;

/// Failures of the `sample` command, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad command line or configuration; exit code 1.
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    /// An error raised by the engine, with context; exit code 2.
    #[error("{context}: {source}")]
    Engine { context: String, source: ssm_core::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> CliError {
        CliError::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> CliError {
        CliError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches context to engine errors.
pub trait Context<T> {
    fn context(self, f: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T> Context<T> for ssm_core::Result<T> {
    fn context(self, f: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|source| CliError::Engine { context: f(), source })
    }
}

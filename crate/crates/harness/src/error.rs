use std::io;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("trace error in {path}: {message}")]
    Trace { path: String, message: String },
}

impl HarnessError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Runtime(_) => 3,
            HarnessError::Io(_) | HarnessError::Trace { .. } => 4,
        }
    }

    pub fn io(path: &Path, err: io::Error) -> Self {
        HarnessError::Io(format!("{}: {err}", path.display()))
    }

    pub fn trace(path: &Path, message: impl Into<String>) -> Self {
        HarnessError::Trace {
            path: path.display().to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

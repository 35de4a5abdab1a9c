use std::path::PathBuf;

use occo::OccoError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit code: 1 config, 2 invariant, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Invariant(_) => 2,
            HarnessError::Io { .. } => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}

impl From<OccoError> for HarnessError {
    fn from(e: OccoError) -> Self {
        match e {
            OccoError::InvariantViolation(_) | OccoError::Protocol(_) => HarnessError::Invariant(e.to_string()),
            _ => HarnessError::Config(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

use std::path::PathBuf;

use mro_core::AuditError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed input: bad header, non-integer cell, duplicate row.
    #[error("{}:{line}: column `{column}`: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        column: String,
        message: String,
    },
    /// Well-formed input that violates a domain invariant.
    #[error("{context}: {source}")]
    Validation {
        context: String,
        #[source]
        source: AuditError,
    },
    #[error("{}:{line}: column `{column}`: negative count {value}", path.display())]
    NegativeCount {
        path: PathBuf,
        line: u64,
        column: String,
        value: i128,
    },
    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    #[error("usage: {0}")]
    Usage(String),
    #[error("report verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(
        path: &std::path::Path,
        line: u64,
        column: &str,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            path: path.to_path_buf(),
            line,
            column: column.to_string(),
            message: message.into(),
        }
    }

    /// Process exit status for this error: 2 for usage errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config { .. } => 2,
            _ => 1,
        }
    }
}

impl From<AuditError> for Error {
    fn from(source: AuditError) -> Self {
        Error::Validation {
            context: "validation error".into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

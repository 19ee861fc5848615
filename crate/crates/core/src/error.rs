use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library. Each variant maps to a stable
/// machine-readable kind used by the CLI error line.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid action: {0}")]
    Action(String),

    #[error("state space too large: {0}")]
    Size(String),

    #[error("no stationary distribution: {0}")]
    Chain(String),

    #[error("comparison mismatch: {0}")]
    Comparison(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Action(_) => "action",
            Error::Size(_) => "size",
            Error::Chain(_) => "chain",
            Error::Comparison(_) => "comparison",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

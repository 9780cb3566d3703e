use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Unreadable or unusable input data.
    #[error("{0}")]
    Data(String),
    /// Incomplete, invalid or degenerate parameters.
    #[error("{0}")]
    Params(String),
    #[error("{0}")]
    Ensemble(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 2,
            CliError::Data(_) => 3,
            CliError::Params(_) => 4,
            CliError::Ensemble(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

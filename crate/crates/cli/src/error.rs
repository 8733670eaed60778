use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] specpart::Error),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid run directory {}: {message}", path.display())]
    RunDir { path: PathBuf, message: String },

    #[error("interrupted; checkpoint written to {}", .0.display())]
    Interrupted(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Checkpoint(_) | CliError::RunDir { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Interrupted(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

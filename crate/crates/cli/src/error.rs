use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(chordrep::Error),
    #[error("run failed: {0}")]
    Run(String),
    #[error("{failed} of {total} cells failed")]
    Partial { failed: usize, total: usize },
    #[error("selftest failed: {0}")]
    Selftest(String),
}

impl From<chordrep::Error> for CliError {
    fn from(e: chordrep::Error) -> Self {
        match e {
            chordrep::Error::Config(m) => CliError::Config(m),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Partial { .. } => 3,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

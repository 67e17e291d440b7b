use std::path::PathBuf;

use escher_baselines::BaselineError;
use escher_net::NetError;

/// Process exit codes of the command-line tool.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] escher_core::Error),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Json(_) => exit::USAGE,
            Self::Core(escher_core::Error::InvalidConfig(_)) => exit::USAGE,
            Self::Net(NetError::Config(_)) => exit::USAGE,
            Self::Numerical(_) | Self::Net(NetError::NonFinite { .. }) => exit::NUMERICAL,
            _ => exit::DATA,
        }
    }
}

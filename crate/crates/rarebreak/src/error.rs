use std::path::PathBuf;

use rarebreak_core::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const GATE_FAIL: i32 = 4;
    pub const TRAINING: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("fidelity gate failed: {0}")]
    GateFailed(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Data(_) | CliError::Io { .. } => exit::DATA,
            CliError::GateFailed(_) => exit::GATE_FAIL,
            CliError::Core(e) => match e {
                CoreError::Config(_) => exit::CONFIG,
                CoreError::Parse { .. }
                | CoreError::Schema(_)
                | CoreError::Shape(_)
                | CoreError::Domain(_)
                | CoreError::InsufficientMinority(_) => exit::DATA,
                CoreError::Numerical(_) | CoreError::Training(_) | CoreError::Selection(_) => {
                    exit::TRAINING
                }
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

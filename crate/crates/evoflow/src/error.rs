use std::process::ExitCode;

use evoflow_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl AppError {
    /// 2 for usage, config and domain errors; 3 for numerical refusals.
    pub fn exit_code(&self) -> ExitCode {
        match self {
            AppError::Core(CoreError::Refused(_)) => ExitCode::from(3),
            _ => ExitCode::from(2),
        }
    }
}

pub const EXIT_VIOLATION: u8 = 1;

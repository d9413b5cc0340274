use std::path::PathBuf;

/// Failures surfaced by the command-line front end, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error(transparent)]
    Model(#[from] hfbs_core::Error),
    #[error("{0}")]
    Unstable(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 2,
            AppError::Data { .. } | AppError::Parse { .. } | AppError::Model(_) => 3,
            AppError::Unstable(_) => 4,
        }
    }

    pub fn data(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        AppError::Data {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;

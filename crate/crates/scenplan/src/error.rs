use std::path::PathBuf;

use scenplan_core::Error as CoreError;

pub type Result<T> = std::result::Result<T, AppError>;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),

    #[error("invalid config {path}: {reason}")]
    Config { path: PathBuf, reason: String },

    #[error("{context}: {source}")]
    Model {
        context: String,
        #[source]
        source: CoreError,
    },

    #[error("solver failed during {context}: {source}")]
    Solver {
        context: String,
        #[source]
        source: CoreError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl AppError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 2,
            AppError::Config { .. } | AppError::Model { .. } | AppError::Format { .. } => 3,
            AppError::Solver { .. } => 4,
            AppError::Io { .. } => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        AppError::Config {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    /// Sorts a core error into configuration trouble or solver trouble.
    pub fn from_core(context: impl Into<String>, source: CoreError) -> Self {
        let context = context.into();
        match source {
            CoreError::Infeasible | CoreError::Convergence { .. } | CoreError::SupportResolve { .. } => {
                AppError::Solver { context, source }
            }
            _ => AppError::Model { context, source },
        }
    }
}

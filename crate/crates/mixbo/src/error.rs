use std::path::PathBuf;

/// Errors of the std layer, grouped by the exit-code contract of the CLI.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Engine(#[from] mixbo_core::Error),

    #[error("{0}")]
    Validation(String),

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("campaign {0:?} not found")]
    NotFound(String),

    #[error("campaign {0:?} already exists")]
    Exists(String),

    #[error("stale version {given}; current version is {current}")]
    Stale { given: u64, current: u64 },

    #[error("campaign {0:?} is locked by another writer")]
    Locked(String),

    #[error("event log of campaign {id:?} is inconsistent: {message}")]
    Corrupt { id: String, message: String },
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Io = 1,
    Validation = 2,
    Numerical = 3,
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_class(&self) -> ExitClass {
        match self {
            AppError::Io { .. } | AppError::Locked(_) | AppError::Corrupt { .. } => ExitClass::Io,
            AppError::Engine(e) if e.is_numerical() => ExitClass::Numerical,
            _ => ExitClass::Validation,
        }
    }
}

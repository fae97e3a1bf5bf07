use std::path::PathBuf;

use robust_classo::Error as CoreError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_KKT: i32 = 4;
pub const EXIT_INVALID: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid arguments: {0}")]
    InvalidArgs(String),

    #[error("{context}: {source}")]
    Core {
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
}

impl CliError {
    pub fn core(context: impl Into<String>, source: CoreError) -> Self {
        CliError::Core {
            context: context.into(),
            source,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => EXIT_PARSE,
            CliError::InvalidArgs(_) => EXIT_INVALID,
            CliError::Io { .. } => EXIT_IO,
            CliError::Core { source, .. } => core_exit_code(source),
        }
    }
}

/// Input-validation failures are argument errors, numerical failures are
/// solver errors, and failed optimality checks get their own code.
pub fn core_exit_code(e: &CoreError) -> i32 {
    match e.root() {
        CoreError::KktFailure { .. } => EXIT_KKT,
        CoreError::DegenerateScale { .. }
        | CoreError::MaxSweepsExceeded { .. }
        | CoreError::NoSuchSparsity { .. } => EXIT_SOLVER,
        _ => EXIT_INVALID,
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

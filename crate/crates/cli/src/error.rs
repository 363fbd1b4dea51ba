use esn_mor::EsnError;
use thiserror::Error;

/// Process exit codes. `2` is left to clap for usage errors.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 3;
    pub const NUMERICAL: i32 = 4;
    pub const IO: i32 = 5;
}

#[derive(Error, Debug)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("{0}")]
    Validation(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error(transparent)]
    Core(#[from] EsnError),
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) => exit::VALIDATION,
            CliError::Io { .. } => exit::IO,
            CliError::Core(e) => match e {
                EsnError::Io(_) => exit::IO,
                EsnError::Diverged { .. }
                | EsnError::NonFinite(_)
                | EsnError::SingularRidge
                | EsnError::SingularInterpolation { .. } => exit::NUMERICAL,
                _ => exit::VALIDATION,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

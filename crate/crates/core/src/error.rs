use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EsnError {
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperParams(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("state diverged at step {step}")]
    Diverged { step: usize },

    #[error("singular normal equations at lambda = 0; use a positive regularization")]
    SingularRidge,

    #[error("basis columns are not orthonormal (deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },

    #[error("singular interpolation system while selecting pivot for column {column}")]
    SingularInterpolation { column: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid signal spec: {0}")]
    InvalidSignal(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("malformed model file: {0}")]
    Format(String),
}

pub type Result<T, E = EsnError> = std::result::Result<T, E>;

impl From<std::io::Error> for EsnError {
    fn from(e: std::io::Error) -> Self {
        EsnError::Io(e.to_string())
    }
}

impl From<csv::Error> for EsnError {
    fn from(e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(_) => EsnError::Io(e.to_string()),
            _ => EsnError::InvalidDataset(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for EsnError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            EsnError::Io(e.to_string())
        } else {
            EsnError::Format(e.to_string())
        }
    }
}

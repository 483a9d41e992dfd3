use thiserror::Error;

/// Errors raised by the tensor-train and identification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dense size {requested} exceeds the configured cap of {cap} entries")]
    SizeCapExceeded { requested: usize, cap: usize },

    #[error("mode sizes differ: {left:?} vs {right:?}")]
    ModeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("unsupported layout: {0}")]
    UnsupportedLayout(String),

    #[error("integration failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("numerical backend failure: {0}")]
    Numerical(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

use thiserror::Error;

/// Errors raised by the numerical kernels and the command layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("accuracy failure: {what} (achieved error estimate {achieved:.3e})")]
    AccuracyFailure { what: String, achieved: f64 },

    #[error("no limit: {0}")]
    NoLimit(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("state error: {0}")]
    State(String),

    #[error("config error at line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

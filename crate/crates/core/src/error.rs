use std::fmt;

/// Errors produced by the forecasting core.
#[derive(Debug)]
pub enum Error {
    /// Incompatible tensor shapes (both shapes are named in the message).
    Shape(String),
    /// Invalid architecture or run configuration.
    Config(String),
    /// Malformed input data: non-numeric cells, ragged rows, non-finite values.
    Parse(String),
    /// Operation invoked out of order, e.g. backward without a forward trace.
    State(String),
    /// A quantity that must stay finite became NaN or infinite.
    NonFinite(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::State(msg) => write!(f, "state error: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the library.
///
/// The variants map onto the CLI's exit-code contract: [`Error::Usage`] is a
/// caller mistake (exit 2), everything else is a runtime failure (exit 1).
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible arguments, malformed identifiers, task/loss mismatches.
    #[error("usage error: {0}")]
    Usage(String),
    /// Invalid configuration values (e.g. a covariance matrix that is not PSD).
    #[error("configuration error: {0}")]
    Config(String),
    /// A finite resource ran out, e.g. a tabular file without enough rows.
    #[error("resource error: {0}")]
    Resource(String),
    /// The input data does not support the requested estimate.
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! usage {
    ($($arg:tt)*) => { $crate::error::Error::Usage(format!($($arg)*)) };
}

macro_rules! degenerate {
    ($($arg:tt)*) => { $crate::error::Error::Degenerate(format!($($arg)*)) };
}

pub(crate) use degenerate;
pub(crate) use usage;

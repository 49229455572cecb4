use std::path::PathBuf;

/// Errors raised anywhere in the linkage engine.
///
/// The variants double as exit-status categories for the command-line front end.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Inconsistent or missing configuration (bad PIV declarations, missing time column, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data that cannot be interpreted under the configuration.
    #[error("data error: {0}")]
    Data(String),

    /// A function was called with arguments outside its domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A probability computation degenerated (all weights zero, non-finite values).
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status conventionally associated with this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Argument(_) => 2,
            Error::Data(_) => 3,
            Error::Numeric(_) | Error::Io { .. } => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

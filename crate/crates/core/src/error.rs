use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file content. `line` is 1-based when known.
    #[error("format error in {context} at line {line}: {message}")]
    Format {
        context: String,
        line: usize,
        message: String,
    },

    #[error("missing header key `{0}`")]
    MissingKey(String),

    #[error("unsupported {key}: `{value}`")]
    Unsupported { key: String, value: String },

    #[error("raw data size mismatch: expected {expected} bytes, found {found}")]
    SizeMismatch { expected: u64, found: u64 },

    /// Values that parse but break a domain invariant (NaN, negative reflectance, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A caller-supplied argument outside the accepted domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Inputs for which the requested quantity is undefined (zero variance, zero energy, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    /// Endmember extraction failed; carries how far the iteration got.
    #[error("extraction failed: {0}")]
    Extraction(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the filesystem rather than by data or numerics.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }

    /// True for errors a command line front end should report as a numerical failure.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_)
                | Error::Infeasible
                | Error::Unbounded
                | Error::Degenerate(_)
                | Error::Extraction(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

//! Error type shared across the engine.
//!
//! Variants are grouped by how a caller should react: `Validation` means the
//! inputs can never work (bad shapes, out-of-range parameters, malformed
//! files), `Numeric` means a computation failed to produce a usable value
//! (divergence, degenerate denominators), and `Io` wraps filesystem and
//! serialization failures.  The CLI maps these groups onto distinct process
//! exit codes.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs violate a precondition: mismatched shapes, empty panels,
    /// parameters outside their domain, malformed or inconsistent files.
    #[error("validation: {0}")]
    Validation(String),

    /// A numeric procedure failed: a solver diverged, a variance collapsed to
    /// zero where a ratio needs it, a matrix was not positive definite.
    #[error("numeric: {0}")]
    Numeric(String),

    /// Filesystem or serialization failure, with enough context to locate it.
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> Self {
        Error::Io(msg.into())
    }

    /// Stable category name, used by the CLI to pick an exit code.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Numeric(_) => "numeric",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

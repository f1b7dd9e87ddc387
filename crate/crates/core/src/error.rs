//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by simulator and receiver operations.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (non-finite, out of range, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Load and antenna impedances cancel, the reflection coefficient is undefined.
    #[error("singular impedance: Z_x + conj(Z_a) is zero")]
    SingularImpedance,

    /// Inconsistent configuration (mismatched durations, bad filter spec, ...).
    #[error("configuration error: {0}")]
    Configuration(String),

    /// An input contained a zero where a logarithm must be taken.
    #[error("singular input: {0}")]
    SingularInput(String),

    /// A series approximation was evaluated outside its validity regime.
    #[error("out of regime: {0}")]
    OutOfRegime(String),

    /// A text record failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// An I/O operation failed; the path is included for context.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Wrap an I/O error with the path it occurred on.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

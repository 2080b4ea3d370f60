//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed a value outside an operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An on-disk artifact does not have the expected structure.
    #[error("format error: {0}")]
    Format(String),

    /// A text input failed to parse; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A run-configuration document is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// A computation produced or met non-finite values.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Input geometry is too degenerate for the operation.
    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    /// Partition planning produced an unusable plan.
    #[error("planning error: {0}")]
    Planning(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code class used by the CLI: 2 for data and format
    /// problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_)
            | Error::Format(_)
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Config(_)
            | Error::Planning(_) => 2,
            Error::Numeric(_) | Error::Degenerate(_) => 3,
        }
    }
}

use std::io;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    /// Wrong magic bytes or unsupported version.
    #[error("format error: {0}")]
    Format(String),

    /// Truncated or trailing payload.
    #[error("corrupt file at byte offset {offset}: {reason}")]
    Corruption { offset: u64, reason: String },

    #[error("validation error: {0}")]
    Validation(String),

    /// Two inputs that must agree do not (e.g. attention sidecar vs corpus).
    #[error("consistency error: {0}")]
    Consistency(String),

    /// A caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("index build failed: {0}")]
    Build(String),

    #[error("query error: {0}")]
    Query(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("computation error: {0}")]
    Computation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

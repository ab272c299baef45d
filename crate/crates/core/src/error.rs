use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("query graph contains a cycle")]
    Cycle,

    #[error("invalid query graph: {0}")]
    InvalidQuery(String),

    #[error("unknown {kind} id {id}")]
    MissingId { kind: &'static str, id: usize },

    #[error("no contextual coverage for: {}", .0.join(", "))]
    MissingCoverage(Vec<String>),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

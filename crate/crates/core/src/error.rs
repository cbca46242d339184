//! Crate-wide error type.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A spin assignment is missing a value for an active index.
    IncompleteAssignment { index: usize },
    /// An operation referenced an index that is not active.
    InvalidIndex { index: usize },
    /// A pair merge with identical or inactive indices.
    InvalidMerge { keep: usize, remove: usize },
    /// Back-substitution hit a merge whose kept spin has no value yet.
    InconsistentRecord { index: usize },
    /// A bitstring length does not match the variable layout.
    DecodeLength { expected: usize, got: usize },
    /// The instance (or configuration) admits no feasible assignment.
    Infeasible(String),
    /// A parameter is out of its admissible range.
    InvalidParameter(String),
    /// A configuration combination is not allowed.
    Config(String),
    /// The problem exceeds a hard size cap; refuse rather than approximate.
    TooLarge { size: usize, cap: usize },
    /// JSON (de)serialization failure.
    Json(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::IncompleteAssignment { index } => {
                write!(f, "assignment is missing a value for active index {index}")
            }
            Error::InvalidIndex { index } => write!(f, "index {index} is not active"),
            Error::InvalidMerge { keep, remove } => {
                write!(f, "cannot merge spin {remove} into {keep}")
            }
            Error::InconsistentRecord { index } => {
                write!(f, "elimination record references unknown spin {index}")
            }
            Error::DecodeLength { expected, got } => {
                write!(f, "bitstring length {got} does not match layout size {expected}")
            }
            Error::Infeasible(msg) => write!(f, "infeasible: {msg}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::TooLarge { size, cap } => {
                write!(f, "problem size {size} exceeds cap {cap}")
            }
            Error::Json(msg) => write!(f, "json error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Errors surfaced by the numeric and sampling routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An operation received an empty input where at least one element is required.
    EmptyInput(&'static str),
    /// A value that must be finite was NaN or infinite.
    NonFinite(&'static str),
    /// A time parameter fell outside its valid interval.
    InvalidTime(f64),
    /// Mismatched dimensions between two inputs.
    DimMismatch { expected: usize, got: usize, what: &'static str },
    /// An energy function was evaluated at a singular configuration.
    Singular(String),
    /// The requested operation is not supported for this input.
    Unsupported(String),
    /// A parameter violated its documented precondition.
    InvalidArg(String),
    /// Checkpoint decode or validation failure.
    Checkpoint(String),
    /// A numeric procedure failed to converge or produced unusable values.
    Numeric(String),
    /// File IO failure (only with the `std` feature).
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::InvalidTime(t) => write!(f, "time {t} outside valid interval"),
            Error::DimMismatch { expected, got, what } => {
                write!(f, "dimension mismatch in {what}: expected {expected}, got {got}")
            }
            Error::Singular(msg) => write!(f, "singular configuration: {msg}"),
            Error::Unsupported(msg) => write!(f, "unsupported: {msg}"),
            Error::InvalidArg(msg) => write!(f, "invalid argument: {msg}"),
            Error::Checkpoint(msg) => write!(f, "checkpoint error: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric failure: {msg}"),
            Error::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

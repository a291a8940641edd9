//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Errors surfaced by series, sampler, and diagnostic operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An input violates a documented precondition of the operation.
    Precondition(String),
    /// A numeric routine could not certify the requested error bound.
    Uncertified(String),
    /// A sampler or solver hit its configured resource cap.
    BudgetExhausted { what: &'static str, limit: u64 },
    /// Rejection sampling exhausted its attempt budget.
    RejectionExhausted { attempts: u64, accepted: u64 },
    /// The operation is not implemented for this expression shape.
    Unsupported(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
            Error::Uncertified(msg) => write!(f, "cannot certify requested bound: {msg}"),
            Error::BudgetExhausted { what, limit } => {
                write!(f, "resource cap hit: {what} exceeded {limit}")
            }
            Error::RejectionExhausted { attempts, accepted } => write!(
                f,
                "rejection sampling exhausted {attempts} attempts ({accepted} accepted)"
            ),
            Error::Unsupported(msg) => write!(f, "unsupported: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn precondition(msg: impl fmt::Display) -> Error {
    Error::Precondition(alloc::format!("{msg}"))
}

pub(crate) fn uncertified(msg: impl fmt::Display) -> Error {
    Error::Uncertified(alloc::format!("{msg}"))
}

pub(crate) fn unsupported(msg: impl fmt::Display) -> Error {
    Error::Unsupported(alloc::format!("{msg}"))
}

use thiserror::Error;

/// Failure classes shared by every module in the crate.
///
/// `Invalid` covers malformed inputs (unsorted breakpoints, mismatched
/// lengths, out-of-range exponents). `Domain` covers inputs that are
/// well-formed but outside an operation's domain (negative values under a
/// fractional power, evaluation at a breakpoint of a log-singular kernel).
/// `Guard` is raised when a numerical safety check trips (ambiguous floor,
/// enumeration cap, condition-number ceiling) and the computation refuses to
/// continue rather than silently degrade. `NoConvergence` is reserved for
/// iterative procedures that exhaust their iteration budget.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical guard: {0}")]
    Guard(String),
    #[error("did not converge: {0}")]
    NoConvergence(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn guard<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Guard(msg.into()))
}

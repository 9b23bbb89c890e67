use thiserror::Error;

/// Errors raised by argument and domain checks across the crate.
///
/// Solvers with a best-so-far payload ([`crate::chebsolve`], [`crate::lsq`],
/// [`crate::caa`]) carry their own error types.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("value out of supported range: {0}")]
    Range(String),
    #[error("outside the domain of the formula: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

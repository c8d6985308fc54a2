use thiserror::Error;

/// Errors raised across the library.
///
/// The variants map onto the failure classes callers need to tell apart:
/// bad arguments, bad data, numerical breakdown, and optimizer or study
/// failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of a mathematical function.
    #[error("domain error: {0}")]
    Domain(String),
    /// User-supplied data or configuration is invalid.
    #[error("input error: {0}")]
    Input(String),
    /// A computation produced a non-finite or singular intermediate.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// A statistic is undefined for the given sample (e.g. zero variance).
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),
    /// The optimizer or a replicate loop failed to converge.
    #[error("convergence error: {0}")]
    Convergence(String),
    /// A Monte Carlo study could not be completed.
    #[error("study error: {0}")]
    Study(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}

pub(crate) fn numerical(msg: impl Into<String>) -> Error {
    Error::Numerical(msg.into())
}

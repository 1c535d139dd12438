use thiserror::Error;

/// Errors produced by the forward model, the eigen solvers and the fitter.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violated a documented precondition. `field` names the offending input.
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },
    /// An iterative method failed to converge or a system turned out unstable/singular.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// True for errors caused by bad inputs rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// `InvalidInput` covers every rejected precondition (domain violations,
/// degree mismatches, non-closed torsion). `Numerical` is reserved for
/// integrations or fits that ran but could not produce a usable answer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain violation at r = {r}: {reason}")]
    Domain { r: f64, reason: String },
    #[error("form degree mismatch: {0}")]
    Degree(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// True for errors caused by the caller's input rather than the numerics.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the library. Variants map onto CLI exit classes:
/// validation-type errors are caller mistakes, `Numerical` is a convergence
/// or conditioning failure.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QetError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("operator is not Hermitian (defect {defect:.3e})")]
    NonHermitian { defect: f64 },

    #[error("operator is not unitary (defect {defect:.3e})")]
    NonUnitary { defect: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl QetError {
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        QetError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than failed numerics.
    pub fn is_validation(&self) -> bool {
        !matches!(self, QetError::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, QetError>;

use thiserror::Error;

use crate::verify::SequenceViolation;

pub type Result<T> = std::result::Result<T, RegulatorError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegulatorError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("coefficient sequence violates {} condition(s); first: {}", .0.len(), .0[0])]
    InvalidSequence(Vec<SequenceViolation>),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state diverged at t = {t}: {detail}")]
    Overflow { t: f64, detail: String },

    #[error("trajectory too short: {0}")]
    TrajectoryTooShort(String),

    #[error("polynomial is not Hurwitz (largest real part {0:e})")]
    NotHurwitz(f64),

    #[error("singular linear solve at omega = {0}")]
    SingularSolve(f64),

    #[error("{0}")]
    Insufficient(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> RegulatorError {
    RegulatorError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

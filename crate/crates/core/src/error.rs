//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide error enum.
///
/// Mathematical *failures* (an identity that does not hold) are not errors;
/// they are reported through [`crate::report::VerificationReport`]. Errors are
/// reserved for violated preconditions and resource limits.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ring mismatch: {left} vs {right}")]
    RingMismatch { left: String, right: String },

    #[error("{value} is not a unit in {ring}")]
    NonUnit { value: String, ring: String },

    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },

    #[error("not invertible: {0}")]
    NotInvertible(String),

    #[error("singular denominator: {value}")]
    SingularDenominator { value: String },

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("closure violation: {0}")]
    ClosureViolation(String),

    #[error("size budget exceeded: needs {needed} entries, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },

    #[error("invalid positions: {0}")]
    InvalidPositions(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("resample cap reached after {0} singular draws")]
    ResampleCap(u32),
}

pub type Result<T> = std::result::Result<T, Error>;

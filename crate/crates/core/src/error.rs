use thiserror::Error;

/// Errors raised by the simulator and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid subsystem selection: {0}")]
    InvalidSubsystems(String),

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("operator is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("trace {0} exceeds 1")]
    TraceExceeded(f64),

    #[error("observable is not involutive (max deviation of A^2 from I is {0:e})")]
    NotInvolutive(f64),

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("missing setting combination: {0}")]
    MissingSettings(String),

    #[error("marginal depends on a remote setting (deviation {0:e})")]
    Signaling(f64),

    #[error("pipeline and closed form disagree by {deviation:e} at {context}")]
    OracleMismatch { deviation: f64, context: String },

    #[error("bisection interval does not bracket a sign change: {0}")]
    NonBracketing(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must lie in [0, 1]",
        })
    }
}

use thiserror::Error;

/// Errors raised by simulators, oracles and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("profile violation: {0}")]
    Profile(#[from] crate::model::ProfileViolation),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("integrator failed: {0}")]
    Integrator(String),

    #[error("series diverges: {0}")]
    Divergent(String),

    #[error("numerical instability: {0}")]
    Unstable(String),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

use thiserror::Error;

/// Errors raised anywhere in the controller, simulator, or file handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration blew up at t = {t:.6} s: {quantity} is not finite")]
    IntegrationBlowup { t: f64, quantity: &'static str },

    #[error("pendulum left the upright region at t = {t:.6} s (x1 = {x1:.6} rad, |x1| >= pi/2)")]
    AngleLimit { t: f64, x1: f64 },

    #[error("non-finite {quantity} at t = {t:.6} s")]
    NonFinite { t: f64, quantity: &'static str },

    #[error("loss of controllability at t = {t:.6} s: |B| = {b:e}")]
    Uncontrollable { t: f64, b: f64 },

    #[error("parameters not yet identifiable: {0}")]
    NotIdentifiable(String),

    #[error("invalid config `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

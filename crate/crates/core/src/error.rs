use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid packet: {0}")]
    InvalidPacket(String),

    #[error("non-finite integrand value at sample {index}")]
    NonFinite { index: usize },

    #[error("quadrature did not converge: achieved error estimate {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("grid resolution insufficient: {0}")]
    Resolution(String),

    #[error("internal consistency defect: {0}")]
    Defect(String),

    #[error("calibration: {0}")]
    Calibration(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error at {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, AuditError>;

use thiserror::Error;

/// Errors surfaced by every layer of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },

    #[error("score tensor needs {cells} cells, budget is {budget}")]
    BudgetExceeded { cells: u128, budget: u128 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("certificate failure: {0}")]
    CertificateFailure(String),

    #[error("face gap {gap:e} below threshold {threshold:e}")]
    GapTooSmall { gap: f64, threshold: f64 },

    #[error("input outside the restricted domain: {0}")]
    DomainViolation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("simulation fidelity violation: {0}")]
    Fidelity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dims(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

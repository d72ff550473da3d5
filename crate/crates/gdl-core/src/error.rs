use thiserror::Error;

/// Errors surfaced by the library. `Structural`/`Parameter`/`Capacity`
/// indicate bad inputs; the rest are numeric-contract failures.
#[derive(Debug, Error)]
pub enum GdlError {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("quadrature resolution: {0}")]
    Resolution(String),
    #[error("integration failure: {0}")]
    Integration(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("non-primitive channel: {0}")]
    NonPrimitive(String),
    #[error("iteration cap exceeded: {0}")]
    Timeout(String),
    #[error("linear algebra backend: {0}")]
    Backend(String),
}

impl From<ndarray_linalg::error::LinalgError> for GdlError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        GdlError::Backend(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GdlError>;

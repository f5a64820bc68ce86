use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid training parameter: {0}")]
    InvalidParams(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("histogram shape mismatch: worker {worker} sent {got} bins, expected {expected}")]
    ShapeMismatch { worker: usize, expected: usize, got: usize },
    #[error("collective operation failed: {0}")]
    Collective(String),
    #[error("model format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the PQ engine and the performance model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PqaError {
    /// Inconsistent dimensions between tensors, layers or tables.
    #[error("shape error: {0}")]
    Shape(String),
    /// An argument outside its valid domain.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A numerical procedure could not produce a result.
    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, PqaError>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(PqaError::Shape(msg.into()))
}

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(PqaError::Argument(msg.into()))
}

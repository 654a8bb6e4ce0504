use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("tempered integral diverges: {0}")]
    Divergence(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("stability guard: {0}")]
    Stability(String),
    #[error("non-finite state on path {path_id} at step {step} (t = {time})")]
    BlowUp { path_id: u64, step: u64, time: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

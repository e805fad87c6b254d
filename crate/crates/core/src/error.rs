use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input violates a structural precondition (non-Hermitian, non-unitary,
    /// invalid density matrix, ...).
    #[error("validation error: {0}")]
    Validation(String),
    /// Input lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    /// A time integrator blew up or drifted past its tolerance.
    #[error("integration failure at step {step}: {reason}")]
    Integration { step: usize, reason: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("sampler error: {0}")]
    Sampler(String),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

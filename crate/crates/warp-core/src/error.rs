use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum WarpError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value in {context} at step {step}")]
    Divergence { context: &'static str, step: usize },

    #[error("numerical overflow in layer {layer} of the root network")]
    RootOverflow { layer: usize },

    #[error("integration failure at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    #[error("invalid file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl WarpError {
    pub fn contract(msg: impl Into<String>) -> Self {
        WarpError::Contract(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, WarpError>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("path delay {tau:e} s aliases: must be below 1/Δ = {limit:e} s")]
    DelayAliasing { tau: f64, limit: f64 },

    #[error("pilot entry {index} is zero")]
    ZeroPilot { index: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged at epoch {epoch}: loss {loss:e} exceeds 10x initial loss {initial:e}")]
    Diverged { epoch: usize, loss: f64, initial: f64 },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid order: {0}")]
    InvalidOrder(String),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("flux is not invertible at value {value} ({problem})")]
    NotInvertible { problem: &'static str, value: f64 },

    #[error("sonic state: flux derivative {derivative:e} at interface {interface} is too small to invert")]
    Sonic { interface: usize, derivative: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("state/basis mismatch: {0}")]
    Mismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite state after step {step} (t = {time})")]
    Unstable { step: usize, time: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

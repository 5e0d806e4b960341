use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid kernel: {0}")]
    Kernel(String),

    #[error("state space of {entries} entries exceeds the cap of {cap}")]
    MemoryCap { entries: u128, cap: usize },

    #[error("probability {value:e} below tolerance at t = {time} (step size too large?)")]
    NegativeProbability { value: f64, time: f64 },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("hypothesis violated at t = 0: {0}")]
    Hypothesis(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

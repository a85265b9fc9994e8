use thiserror::Error;

#[derive(Error, Debug)]
pub enum TtError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("propagation diverged: {0}")]
    Divergence(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed checkpoint: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TtError>;

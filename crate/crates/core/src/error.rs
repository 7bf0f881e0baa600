use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("window radius {required} exceeds the configured maximum {max}")]
    WindowTooLarge { required: usize, max: usize },

    #[error("resource guard: {0}")]
    Resource(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("eigenvalue {lambda:e} below -{bound:e}: window too small for this state")]
    WindowUnderflow { lambda: f64, bound: f64 },

    #[error("block trace {trace:e} below floor {floor:e}")]
    EmptyBlock { trace: f64, floor: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

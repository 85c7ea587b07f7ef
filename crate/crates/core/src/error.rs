use thiserror::Error;

/// Errors produced by the link-model operations.
#[derive(Debug, Error)]
pub enum SimError {
    /// Invalid parameters or incompatible grids.
    #[error("configuration error: {0}")]
    Config(String),
    /// A numerical procedure failed to converge or left its valid domain.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

impl SimError {
    pub fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        SimError::Numerical(msg.into())
    }
}

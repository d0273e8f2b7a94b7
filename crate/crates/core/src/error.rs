use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The IRT queue has no stationary regime: `M <= lambda_bar * Gamma * b1`.
    #[error("unstable system: M = {m} does not exceed lambda_bar * Gamma * b1 = {bound:.4}")]
    UnstableSystem { m: f64, bound: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

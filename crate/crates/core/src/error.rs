use thiserror::Error;

/// Errors raised by the value-of-context engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model shape: {0}")]
    InvalidShape(String),

    #[error("invalid disclosure: {0}")]
    InvalidDisclosure(String),

    #[error("invalid covariate vector: {0}")]
    InvalidCovariates(String),

    #[error("type value {value} at index {index} lies outside [-{ybar}, {ybar}]")]
    OutOfBounds { index: usize, value: f64, ybar: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("enumeration cost {cost} exceeds budget {budget} (n = {n})")]
    Budget { n: u32, cost: u128, budget: u128 },

    #[error("exact mode refuses n = {n}: tables are capped at n <= {cap}")]
    TooLarge { n: u32, cap: u32 },

    #[error("unsupported prior for this operation: {0}")]
    UnsupportedPrior(String),

    #[error("utility is not usable here: {0}")]
    UnsupportedUtility(String),

    #[error("threshold inequality never holds on the search range (up to n = {limit})")]
    UnboundedThreshold { limit: f64 },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("disclosure game with n = {n} exceeds the enumeration cap {cap}")]
    GameCap { n: u32, cap: u32 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dispersion ratio must exceed 1, got {0}")]
    InvalidDispersion(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter set: {0}")]
    InvalidSet(String),
    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("studentizer is zero and no corruption noise was requested")]
    DegenerateVariance,
    #[error("statistic value {value} exceeds declared bound {bound}")]
    BoundViolation { value: f64, bound: f64 },
    #[error("empirical Bentkus split {split} must lie in (0, alpha = {alpha})")]
    InvalidSplit { split: f64, alpha: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),
    #[error("ray-search center {0:?} lies outside the parameter box")]
    InvalidCenter(Vec<f64>),
    #[error("kernel bandwidth must be resolved on data before use")]
    UnresolvedBandwidth,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

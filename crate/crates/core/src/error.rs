use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sample is empty (no division was observed)")]
    EmptySample,
    #[error("sample needs at least {needed} observations, got {got}")]
    SampleTooSmall { needed: usize, got: usize },
    #[error("sample has zero variance")]
    ZeroVariance,
    #[error("evaluation grids differ")]
    GridMismatch,
    #[error("evaluation grid is not symmetric about 1/2")]
    AsymmetricGrid,
    #[error("time {time} lies outside [0, {horizon}]")]
    TimeOutOfRange { time: f64, horizon: f64 },
    #[error("reference density has zero L2 norm")]
    ZeroNorm,
    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },
    #[error("series truncation exceeded {max_terms} terms")]
    TruncationExceeded { max_terms: usize },
    #[error("replicate {replicate}: {attempts} consecutive redraws produced no division")]
    RedrawExhausted { replicate: usize, attempts: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

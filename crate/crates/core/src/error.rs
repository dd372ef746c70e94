use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value {0}")]
    NonFinite(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("points live on different circles (period {0} vs {1})")]
    PeriodMismatch(f64, f64),

    #[error("grid mismatch: expected resolution {expected}, got {actual}")]
    GridMismatch { expected: usize, actual: usize },

    #[error("grid of {actual} points under-resolves kernel index {index}; need at least {required}")]
    UnderResolved {
        index: usize,
        required: usize,
        actual: usize,
    },

    #[error("initial density not normalized: {0}")]
    NotNormalized(String),

    #[error("numerical failure at t = {time}: {reason}")]
    Numerical { time: f64, reason: String },

    #[error("graphop has gamma = {0} > 1; outside the solver class")]
    GammaTooLarge(f64),

    #[error("alpha = {alpha} must exceed 2Cb + b*gamma = {bound}")]
    AlphaTooSmall { alpha: f64, bound: f64 },

    #[error("CFL violated: |V| dt / du = {0} > 0.9")]
    Cfl(f64),

    #[error("picard iteration did not reach tolerance after {iterations} iterations; gaps {gaps:?}")]
    NotConverged { iterations: usize, gaps: Vec<f64> },

    #[error("contraction ratio {ratio} exceeds the bound {bound}")]
    ContractionViolated { ratio: f64, bound: f64 },

    #[error("missing field cache for stamp {0}")]
    MissingStamp(usize),

    #[error("time stamps of the two trajectories differ")]
    StampMismatch,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

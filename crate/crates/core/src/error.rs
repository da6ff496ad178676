use thiserror::Error;

/// Errors raised by the line search, its building blocks and the test problems.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("correlation {0} outside [-1, 1]")]
    InvalidCorrelation(f64),
    #[error("integration limits out of order: lower {lower} > upper {upper}")]
    InvalidLimits { lower: f64, upper: f64 },
    #[error("position {0} is not a valid observation site")]
    InvalidPosition(f64),
    #[error("position {0} already observed")]
    DuplicatePosition(f64),
    #[error("non-finite observation at t = {t}: value {value}, slope {slope}")]
    NonFiniteObservation { t: f64, value: f64, slope: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("empty candidate list")]
    EmptyCandidates,
    #[error("batch size {0} too small, need at least 2 samples")]
    BatchTooSmall(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("not a descent direction: projected gradient {0} >= 0")]
    NotDescentDirection(f64),
    #[error("projected gradient {0} vanishes")]
    VanishingGradient(f64),
    #[error("invalid spectrum: eigenvalue {0} is not positive")]
    InvalidSpectrum(f64),
    #[error("degenerate interval of width {0}")]
    DegenerateInterval(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("objective evaluation failed: {0}")]
    Objective(String),
    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;

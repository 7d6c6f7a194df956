use thiserror::Error;

use crate::estimators::Estimator;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which variate of the `(y, x)` pair an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variate {
    Study,
    Auxiliary,
}

impl std::fmt::Display for Variate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variate::Study => f.write_str("study"),
            Variate::Auxiliary => f.write_str("auxiliary"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty population")]
    EmptyPopulation,

    #[error("population needs at least two units, got {0}")]
    TooFewUnits(usize),

    #[error("non-finite value at row {row}")]
    NonFinite { row: usize },

    #[error("sample size must be positive")]
    ZeroSampleSize,

    #[error("population size {population} is not a multiple of sample size {sample}")]
    NotDivisible { population: usize, sample: usize },

    #[error("length {len} does not equal n*k = {expected}")]
    LengthMismatch { len: usize, expected: usize },

    #[error("start {start} outside 1..={interval}")]
    StartOutOfRange { start: usize, interval: usize },

    #[error("all values are equal; intraclass correlation is undefined")]
    ZeroVariance,

    #[error("degenerate {0} variate (zero variance)")]
    DegenerateVariate(Variate),

    #[error("zero mean for {0} variate; coefficient of variation undefined")]
    ZeroMean(Variate),

    #[error("invalid summary statistics: {0}")]
    InvalidSummary(String),

    #[error("{estimator} undefined: {reason}")]
    EstimatorDomain {
        estimator: Estimator,
        reason: &'static str,
    },

    #[error("{estimator} undefined at start {start}: {reason}")]
    DomainAtStart {
        estimator: Estimator,
        start: usize,
        reason: &'static str,
    },

    #[error("singular normal equations for t4 constants (|D| = {det:e} <= {tol:e})")]
    Singular { det: f64, tol: f64 },

    #[error("infeasible population: {0}")]
    Infeasible(String),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("{0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerical machinery (singular systems,
    /// estimator domain violations) as opposed to bad input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::EstimatorDomain { .. }
                | Error::DomainAtStart { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

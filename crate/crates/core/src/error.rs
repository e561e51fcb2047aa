use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("sample covariance is not positive definite (min/max eigenvalue ratio {ratio:e})")]
    SingularCovariance { ratio: f64 },
    #[error("singular covariance after deleting observation {index}")]
    SingularLeaveOneOut { index: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("rank deficient: expected rank {expected}, found {found}")]
    RankDeficient { expected: usize, found: usize },
    #[error("non-positive responses at indices {indices:?}; supply an explicit shift")]
    NonPositiveResponse { indices: Vec<usize> },
    #[error("parameter {value} outside [{lo}, {hi}]")]
    ParamOutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("vector norm {norm} is not 1")]
    NotUnit { norm: f64 },
    #[error("response has zero variance")]
    ZeroVariance,
    #[error("all eigenvalues are zero")]
    AllZeroSpectrum,
    #[error("every grid point failed")]
    AllParamsFailed,
    #[error("criterion {criterion} requires eigenvalues and cannot be used with {fitter}")]
    IncompatibleCriterion {
        criterion: &'static str,
        fitter: &'static str,
    },
    #[error("zero slope: the fitted direction vanishes")]
    ZeroSlope,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

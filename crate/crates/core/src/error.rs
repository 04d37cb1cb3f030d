use thiserror::Error;

/// Errors raised across the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("weight |x|^{a} is singular at the origin")]
    SingularEvaluation { a: f64 },

    #[error("quadrature node at the origin for singular weight |x|^{a}")]
    SingularQuadrature { a: f64 },

    #[error("region leaves the computational domain [-{extent}, {extent}]^n")]
    DomainOverflow { extent: f64 },

    #[error("subset has zero Lebesgue measure")]
    EmptySubset,

    #[error("profile is degenerate after mean subtraction")]
    DegenerateProfile,

    #[error("need at least {needed} shells above the noise floor, found {found}")]
    InsufficientShells { needed: usize, found: usize },

    #[error("LP iteration limit reached; best feasible value {best_value}")]
    IterationLimit { best_value: f64 },

    #[error("LP is {0}")]
    LpStatus(&'static str),

    #[error("configuration violates theorem hypotheses: {0}")]
    ConfigViolation(String),

    #[error("A_beta value below noise floor ({value:e} < {floor:e})")]
    BelowNoise { value: f64, floor: f64 },

    #[error("cache entry missing at level {level}, index {index}")]
    MissingCacheEntry { level: usize, index: i64 },

    #[error("cache hash mismatch: expected {expected}, found {found}")]
    HashMismatch { expected: String, found: String },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}

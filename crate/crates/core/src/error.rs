use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degrees of freedom must be at least 1, got {0}")]
    InvalidDof(u64),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("covariate domain is unbounded in dimension {0}")]
    UnboundedDomain(usize),

    #[error("no sign change on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("{what} did not converge after {iterations} iterations (estimated error {error:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        error: f64,
    },

    #[error("fewer than two samples ({0}) for a variance estimate")]
    InsufficientSamples(usize),

    #[error("oracle returned a non-finite sample for alternative {alternative} at design point {point}")]
    OracleFailure { alternative: usize, point: usize },

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("unknown benchmark problem id {0}")]
    UnknownProblem(usize),

    #[error("invalid covariate: {0}")]
    InvalidCovariate(String),

    #[error("failed to parse model parameters: {0}")]
    Parse(String),
}

impl Error {
    /// Numerical failures (as opposed to invalid input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoSignChange { .. } | Error::NoConvergence { .. } | Error::OracleFailure { .. }
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

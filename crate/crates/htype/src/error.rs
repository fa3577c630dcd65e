use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("dual frequency must be nonzero")]
    ZeroFrequency,
    #[error("H-type condition violated (residual {residual:.3e}) at mu = {witness:?}")]
    NotHType { witness: Vec<f64>, residual: f64 },
    #[error("bracket matrices are not linearly independent (min pivot {pivot:.3e})")]
    Dependent { pivot: f64 },
    #[error("bracket {index} is not antisymmetric (residual {residual:.3e})")]
    NotAntisymmetric { index: usize, residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{what} = {value} outside the resolvable band (limit {limit})")]
    OutOfBand {
        what: &'static str,
        value: f64,
        limit: f64,
    },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("inadmissible exponents: {0}")]
    Inadmissible(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("iteration did not converge after {iterations} steps (last value {last})")]
    NonConvergence { iterations: usize, last: f64 },
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

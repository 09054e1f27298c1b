use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ellipticity violation: {0}")]
    Ellipticity(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("empty domain")]
    EmptyDomain,

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("shape does not fit in window: {0}")]
    Window(String),

    #[error("degenerate collapse: {0}")]
    DegenerateCollapse(String),

    #[error("insufficient rows: need at least {need}, got {got}")]
    InsufficientRows { need: usize, got: usize },

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("optimizer failure: {0}")]
    OptimizerFailure(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

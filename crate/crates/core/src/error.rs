use thiserror::Error;

/// Errors raised by the toolkit. Numerical outcomes that are part of an
/// operation's contract (envelope infeasibility, solver non-convergence with a
/// returned iterate) are reported through status fields instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("sampler exhausted after {0} attempts")]
    SamplingExhausted(usize),
    #[error("invalid comparison: {0}")]
    InvalidComparison(String),
    #[error("invalid solver setup: {0}")]
    InvalidSetup(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("class is not pseudo-effective: {0}")]
    Infeasible(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

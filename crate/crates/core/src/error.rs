use std::path::PathBuf;

/// Errors raised by the laboratory.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("epsilon {eps} outside the domain of the {scale} scale: requires {requirement}")]
    ScaleDomain {
        scale: String,
        eps: f64,
        requirement: String,
    },
    #[error(
        "quadrature did not converge: estimated error {estimated:e} above tolerance {tolerance:e}"
    )]
    Quadrature { estimated: f64, tolerance: f64 },
    #[error("derivative order {requested} exceeds the configured maximum {max}")]
    DerivativeOrder { requested: usize, max: usize },
    #[error("singular: mollify first ({0})")]
    Singular(String),
    #[error("sampled test function does not decay at the domain boundary (ratio {ratio:e} > {threshold:e})")]
    DomainTruncation { ratio: f64, threshold: f64 },
    #[error("invalid distribution expression: {0}")]
    InvalidExpr(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("too few points for a fit: {got} (need at least {need})")]
    TooFewPoints { got: usize, need: usize },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("kernel table {path}: {reason}")]
    KernelTable { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty sector: {n_up} up / {n_down} down particles on {sites} sites")]
    EmptySector { sites: usize, n_up: usize, n_down: usize },

    #[error("staggered operator ill-defined on odd periodic ring (L = {0})")]
    OddRing(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("operator is not hermitian")]
    NotHermitian,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { what: &'static str, iterations: usize, residual: f64 },

    #[error("propagator tolerance {tolerance:e} not reached with subspace size {subspace} (estimate {estimate:e})")]
    PropagatorTolerance { tolerance: f64, subspace: usize, estimate: f64 },

    #[error("control argument |<Q>/Q_max| = {0} exceeds 1; the cached Q_max is stale or wrong")]
    StaleQMax(f64),

    #[error("insufficient history: need {needed} samples, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("cache {path}: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error("{0} scan cells failed; outputs are partial")]
    PartialScan(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

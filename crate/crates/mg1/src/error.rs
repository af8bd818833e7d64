use thiserror::Error;

/// Errors surfaced by model construction, solvers and verification routines.
#[derive(Debug, Error)]
pub enum Mg1Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("row masses inconsistent: {0}")]
    MassMismatch(String),

    #[error("series did not converge: {0}")]
    SeriesNotConvergent(String),

    #[error("iteration did not converge within {max_iter} steps (last delta {last_delta:.3e})")]
    NotConverged { max_iter: usize, last_delta: f64 },

    #[error("mean drift is nonnegative (sigma = {sigma:.6e}); pass the override to proceed")]
    DriftNonNegative { sigma: f64 },

    #[error("singular matrix in {0}")]
    SingularMatrix(String),

    #[error("chain is not irreducible: {0}")]
    NotIrreducible(String),

    #[error("horizon too short: need {need}, have {have}")]
    HorizonTooShort { need: usize, have: usize },

    #[error("drift target {target} unreachable: {reason}")]
    CannotReachDrift { target: f64, reason: String },

    #[error("tail ratio diverges against the reference distribution: {0}")]
    Divergent(String),

    #[error("degenerate limit: both tail constants vanish")]
    DegenerateLimit,

    #[error("operation requires a finite-support model: {0}")]
    NotFiniteSupport(String),

    #[error("oracle truncation bias {bias:.3e} exceeds tolerance {tol:.3e}")]
    TruncationBiasTooLarge { bias: f64, tol: f64 },

    #[error("invalid tail distribution: {0}")]
    InvalidTail(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Mg1Error>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported interior order {0}; expected 2, 4 or 6")]
    UnsupportedOrder(usize),

    #[error("grid with {n} points is too small for order {order}; need at least {min}")]
    GridTooSmall { order: usize, n: usize, min: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("penalty {iota} is below the stability threshold {iota0}")]
    PenaltyBelowThreshold { iota: f64, iota0: f64 },

    #[error("no stable penalty found in [{lo}, {hi}]")]
    BisectionBracket { lo: f64, hi: f64 },

    #[error("energy condition violated: largest eigenvalue of sym(PQ) is {eig_max:e}")]
    NotNegativeSemidefinite { eig_max: f64 },

    #[error("found {found} admissible roots, expected {expected}")]
    RootCount { found: usize, expected: usize },

    #[error("boundary system is singular (smallest singular value {sigma_min:e})")]
    SingularBoundarySystem { sigma_min: f64 },

    #[error("mismatched grids: {0}")]
    GridMismatch(String),

    #[error("solution blew up at step {step} (t = {time})")]
    Unstable { step: usize, time: f64 },

    #[error("invalid coefficient table: {0}")]
    Table(String),

    #[error("checksum mismatch in coefficient table: expected {expected}, computed {computed}")]
    Checksum { expected: String, computed: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid study: {0}")]
    Study(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

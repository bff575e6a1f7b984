use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scale sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid address {0:?}: symbols must be 1, 2, 3 or 4")]
    InvalidAddress(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("walker exceeded {max_steps} steps without absorption")]
    StepLimitExceeded { max_steps: u64 },

    #[error("discarded {discarded} of {walkers} walkers, above the 0.1% tolerance")]
    TooManyDiscarded { discarded: u64, walkers: u64 },

    #[error("conditional measure undefined: cylinder {0:?} has zero count")]
    UndefinedConditional(String),

    #[error("insufficient counts: {0}")]
    InsufficientCounts(String),

    #[error("depth mismatch: {0} vs {1}")]
    DepthMismatch(usize, usize),

    #[error("cost guard: {0}")]
    CostGuard(String),

    #[error("point lies inside the re-entry disk (distance {distance} <= radius {radius})")]
    InsideReentryDisk { distance: f64, radius: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("malformed table file: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

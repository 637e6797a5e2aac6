use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum IfsError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0}")]
    InvalidInput(String),

    #[error("covering failed: {uncovered} grid point(s) uncovered (first witnesses: {witnesses:?})")]
    CoveringFailed {
        uncovered: usize,
        witnesses: Vec<Vec<f64>>,
    },

    #[error("map is not a contraction on the domain (upper Lipschitz bound {kappa})")]
    NotAContraction { kappa: f64 },

    #[error("no absorbing ball found: family not eventually absorbing")]
    NotAbsorbing,

    #[error("word budget exceeded: {words} words requested, budget {budget}")]
    WordBudget { words: u64, budget: u64 },

    #[error("singular map produced while perturbing (after {attempts} resamples)")]
    SingularPerturbation { attempts: usize },

    #[error("certificate hypothesis failed: {0}")]
    HypothesisFailed(String),

    #[error("branch construction failed at step {step}: {reason}")]
    BranchFailed { step: usize, reason: String },

    #[error("perturbation size {eps} exceeds the certificate margin: {reason}")]
    MarginExceeded { eps: f64, reason: String },

    #[error("symbol window exhausted at origin shift {shift}")]
    WindowExhausted { shift: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, IfsError>;

use alloc::string::String;
use alloc::vec::Vec;

/// Failures raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("truncated SVD did not converge in {iterations} iterations (worst residual {worst:.3e})")]
    NoConvergence {
        iterations: usize,
        worst: f64,
        residuals: Vec<f64>,
    },

    #[error("degenerate window: {users} users x {influencers} influencers")]
    DegenerateWindow { users: usize, influencers: usize },

    #[error("no valid windows to assemble")]
    NoValidWindows,

    #[error("only {eligible} users exceed the fit threshold, need at least {required}; lower tau")]
    TooFewEligible { eligible: usize, required: usize },

    #[error("density clustering found no clusters")]
    NoClusters,

    #[error("rank-deficient design: rank {rank} of {columns} columns")]
    RankDeficient { rank: usize, columns: usize },

    #[error("insufficient observations: have {have}, need more than {need}")]
    InsufficientData { have: usize, need: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    /// Every observation is censored, so the product-limit curve never drops.
    #[error("degenerate KM: sample has no events, mean is undefined")]
    DegenerateKm,

    #[error("no events in sample")]
    NoEvents,

    #[error("solver did not converge after {iterations} iterations (score norm {score_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        best: Vec<f64>,
        score_norm: f64,
    },

    #[error("loss is nonincreasing along an unbounded direction {direction:?}")]
    Unbounded { direction: Vec<f64> },

    #[error("monotone likelihood: coefficient {coordinate} diverged (|beta| > {bound})")]
    MonotoneLikelihood {
        coordinate: usize,
        bound: f64,
        beta: Vec<f64>,
    },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("{failed} of {total} replicates failed (limit {limit})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        limit: usize,
    },
}

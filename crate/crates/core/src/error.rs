use thiserror::Error;

pub type Result<T, E = DcfError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DcfError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("backoff stage {stage} out of range (last stage is {last})")]
    StageOutOfRange { stage: u32, last: u32 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fixed point did not converge after {iterations} iterations (bracket [{lo}, {hi}], residual {residual:e})")]
    NoConvergence {
        iterations: u32,
        lo: f64,
        hi: f64,
        residual: f64,
    },

    #[error("mean delay diverges: per-attempt failure probability p = {p} is too close to 1")]
    DivergentDelay { p: f64 },

    #[error("simulation observed no completed frames after warmup")]
    NoCompletedFrames,
}

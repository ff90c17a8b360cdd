use thiserror::Error;

/// Errors raised by the lab's operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("agreement scan reached the cap of {cap} coordinates without finding a mismatch")]
    ScanCapExceeded { cap: u64 },

    #[error("word is not admissible: transition {from} -> {to} is forbidden")]
    InadmissibleWrap { from: u8, to: u8 },

    #[error("point is not recurrent at time {n}: d(f^n x, x) is not below the closing threshold")]
    NotRecurrent { n: u64 },

    #[error("enumeration budget exceeded: {requested} words requested, budget is {budget}")]
    BudgetExceeded { requested: u128, budget: u128 },

    #[error("intermediate product norm left [1e-300, 1e300] at step {step}; use product_scaled")]
    OverflowRisk { step: usize },

    #[error("all sampled pairs coincide; no Hölder ratio can be formed")]
    DegenerateSample,

    #[error("measure is incompatible with the subshift: {0}")]
    IncompatibleLaw(String),

    #[error("splitting is ill-conditioned: minimal principal angle {angle:e} between blocks")]
    IllConditionedSplitting { angle: f64 },

    #[error("negative power requested on the -inf block {block}, whose restriction is not invertible")]
    NonInvertibleRestriction { block: usize },

    #[error("truncation tail {tail:e} exceeds tolerance {tolerance:e} at N = {n_trunc}")]
    TailNotCertified {
        tail: f64,
        tolerance: f64,
        n_trunc: usize,
    },

    #[error("delta = {delta} violates the validity gate: {reason}")]
    InvalidDelta { delta: f64, reason: String },

    #[error("no recurrence at level {level} (rho = {rho:e}) within max_n = {max_n}")]
    NoRecurrenceFound { level: usize, rho: f64, max_n: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

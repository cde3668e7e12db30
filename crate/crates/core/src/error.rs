use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state left the model domain: {0}")]
    OutOfDomain(String),
    #[error("orbit never returns to the cross-section")]
    NeverReturns,
    #[error("leaf coordinate 0 is the singular leaf")]
    SingularLeaf,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("parameters do not realize case {case}: {detail}")]
    CaseMismatch { case: String, detail: String },
    #[error("region separation below 3*gamma: {}", .0.join(", "))]
    SeparationViolated(Vec<String>),
    #[error("no admissible gamma: {0}")]
    NoValidGamma(String),
    #[error("no preimage of the singular leaf inside the leaf band of block {0}")]
    BandEmpty(i64),
    #[error("preimage at depth {depth} misses the singular leaf by {residual:e}")]
    PreimageInaccurate { depth: usize, residual: f64 },
    #[error("descent-distance bisection failed: {0}")]
    BisectionFailed(String),
    #[error("time {0} lies beyond the built horizon")]
    HorizonExceeded(f64),
    #[error("pseudo-orbit class `{class}` violated at index {index}")]
    ClassViolated { class: &'static str, index: i64 },
    #[error("no separation witness found in block {0}")]
    NoWitnessFound(i64),
    #[error("escape dichotomy violated at t = {0}")]
    DichotomyViolated(f64),
    #[error("candidate {eval_id} beats the floor: {value:e} + {error:e} < {floor:e}")]
    FloorBreached {
        eval_id: usize,
        value: f64,
        error: f64,
        floor: f64,
    },
    #[error("config: {0}")]
    Config(String),
}

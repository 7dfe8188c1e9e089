use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid table parameters: {0}")]
    InvalidSpec(String),
    #[error("arc-length {s} outside [0, {length})")]
    OutOfRange { s: f64, length: f64 },
    #[error("flight from s={s} runs into a corner")]
    CornerHit { s: f64 },
    #[error("grazing collision near s={s}")]
    Grazing { s: f64 },
    #[error("no forward collision found from s={s}")]
    NumericFailure { s: f64 },
    #[error("point is not periodic (residual {residual:e})")]
    NotPeriodic { residual: f64 },
    #[error("Newton refinement stalled after {steps} steps (residual {residual:e})")]
    NoConvergence { steps: usize, residual: f64 },
    #[error("periodic orbit candidate meets a singularity: {0}")]
    SingularOrbit(String),
    #[error("orbit not found: {0}")]
    NotFound(String),
    #[error("seed terminates before its first collision")]
    DegenerateSeed,
    #[error("island verdict is the same at both ends of the scan range")]
    NoTransition,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for the singular outcomes of a single map application.
    pub fn is_singular(&self) -> bool {
        matches!(
            self,
            Error::CornerHit { .. } | Error::Grazing { .. } | Error::NumericFailure { .. }
        )
    }
}

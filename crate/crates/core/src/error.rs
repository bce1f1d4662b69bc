use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rotation matrix: {0}")]
    InvalidRotation(String),

    #[error("non-finite {what}")]
    NonFinite { what: &'static str },

    #[error("non-finite state at step {step} (t = {t:.3} s)")]
    NonFiniteState { step: usize, t: f64 },

    #[error("free-fall singularity: |g e3 - a_des| = {margin:.4} m/s² is below 0.1 g")]
    FreeFall { margin: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Riccati solver: seed gain is not stabilizing (Lyapunov solution not positive definite)")]
    NonStabilizingSeed,

    #[error("Riccati solver did not converge after {iterations} iterations (residual {residual:e})")]
    CareNotConverged { iterations: usize, residual: f64 },

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("stage {stage} collection requires the previous stage's model")]
    MissingPreviousModel { stage: u8 },

    #[error("unsupported model artifact format {0:?}")]
    UnsupportedFormat(String),

    #[error("malformed CSV at line {line}: {reason}")]
    Csv { line: usize, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numerical failures as opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::NonFiniteState { .. }
                | Error::FreeFall { .. }
                | Error::NonStabilizingSeed
                | Error::CareNotConverged { .. }
                | Error::Singular(_)
        )
    }
}

use thiserror::Error;

/// Errors produced by the solvers, the Monte-Carlo oracle and the batch front-end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("unstable step at t = {time}: {reason}")]
    UnstableStep { time: f64, reason: String },

    #[error("density-dependent comparison control requested without a density")]
    MissingDensity,

    #[error("monotonicity violated at iteration {iteration}: cost rose from {previous} to {current}")]
    MonotonicityViolation {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    #[error("non-finite sample path at t = {time}")]
    NonFinitePath { time: f64 },

    #[error("invalid simulation config: {0}")]
    InvalidSimulation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::UnstableStep { .. }
                | Error::MonotonicityViolation { .. }
                | Error::NonFinitePath { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

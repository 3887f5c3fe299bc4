use thiserror::Error;

/// Errors raised by the estimation and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// The intensity vanished at an observed event, so the log-likelihood is -inf.
    #[error("zero intensity in dimension {dim} at event time {time}")]
    ZeroIntensity { dim: usize, time: f64 },

    #[error("simulation diverged: more than {cap} events generated")]
    SimulationDiverged { cap: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported link function: {0}")]
    UnsupportedLink(String),

    #[error("empty model set for dimension {0}")]
    EmptyModelSet(usize),

    #[error("no gap between norm estimates; supply an explicit threshold")]
    NoGap,
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced by certification, rollout and I/O operations.
///
/// Infeasibility of a dual point is *not* an error: the conjugate and the
/// dual objective report it as `f64::INFINITY` / `f64::NEG_INFINITY`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("incompatible smoothing/budget pair: {0}")]
    IncompatibleBudget(String),

    #[error("policy does not expose action values (q_values)")]
    MissingQValues,

    #[error("environment is not discretizable: {0}")]
    NotDiscretizable(String),

    #[error("episode already terminated")]
    EpisodeTerminated,

    #[error("numeric routine failed to converge: {0}")]
    NoConvergence(String),

    #[error("malformed sample-set file: {0}")]
    MalformedFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DdfvError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value {value} outside the open interval (0, 1) in {context}")]
    Domain { value: f64, context: &'static str },

    #[error("mesh admissibility violation: {0}")]
    Admissibility(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("nonlinear solver failed at t = {time}: {reason}")]
    SolverFailure { time: f64, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DdfvError>;

impl DdfvError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        DdfvError::InvalidArgument(msg.into())
    }
}

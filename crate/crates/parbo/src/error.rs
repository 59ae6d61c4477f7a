use thiserror::Error;

/// Errors produced by the optimization toolkit.
#[derive(Debug, Error)]
pub enum ParboError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    /// A level-set band contains no feasible point among the probe set.
    #[error("empty level-set region: {0}")]
    EmptyRegion(String),

    /// A proposed batch violates the minimum-distance safeguard or yields a
    /// singular joint covariance.
    #[error("batch rejected: {0}")]
    BatchRejected(String),

    /// A simulator state that is not physically meaningful (negative
    /// concentrations, impossible flash split, ...).
    #[error("physically infeasible: {0}")]
    Infeasible(String),

    /// The reference surface is too flat to partition.
    #[error("degenerate reference: {0}")]
    DegenerateReference(String),

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ParboError {
    fn from(e: std::io::Error) -> Self {
        ParboError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ParboError>;

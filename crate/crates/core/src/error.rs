use thiserror::Error;

/// Errors produced by the simulation and reconstruction routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry infeasible: {0}")]
    GeometryInfeasible(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("Green's function is singular at coincident points; use the singular-cell integral")]
    Singularity,

    /// `k·h` outside the validity range of the small-cell expansion in strict mode.
    #[error("accuracy violation: k*h = {kh:.4} must be below {limit}")]
    Accuracy { kh: f64, limit: f64 },

    #[error("linear solver failure: {0}")]
    SolverFailure(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("array file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

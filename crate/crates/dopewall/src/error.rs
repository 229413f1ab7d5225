use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("value {0} is not a node of this set")]
    NotANode(f64),
    #[error("unsupported variant: {0}")]
    Unsupported(String),
    #[error("recurrence broke down at degree {degree} even at {bits}-bit precision")]
    PrecisionEscalation { degree: usize, bits: u32 },
    #[error("symmetry violated: parity residual {0:e}")]
    SymmetryViolation(f64),
    #[error("kernel is not a projection: residual {0:e}")]
    InvalidKernel(f64),
    #[error("kernel restriction has eigenvalue {0} outside [0,1]")]
    KernelValidity(f64),
    #[error("instance too large: {0} configurations")]
    Capacity(u128),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("argument {0} outside supported range")]
    Range(f64),
    #[error("missing input: {0}")]
    Dependency(String),
    #[error("accuracy check failed: {0}")]
    Accuracy(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

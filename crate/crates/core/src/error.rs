use thiserror::Error;

/// Errors produced by the compensation core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("index {index} out of range (max {max})")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("parameter {value} outside the knot range [{lo}, {hi}]")]
    OutsideKnotRange { value: f64, lo: f64, hi: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("invalid transfer function: {0}")]
    InvalidTransferFunction(&'static str),
    #[error("lifted matrix is singular (zero direct feedthrough); exact inversion needs a biproper model")]
    SingularLiftedMatrix,
    #[error("singular value decomposition did not converge")]
    SvdNoConvergence,
    #[error("transfer function is unstable (max pole magnitude {0})")]
    Unstable(f64),
    #[error("path geometry: {0}")]
    InvalidPath(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

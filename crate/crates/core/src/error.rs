use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by geometric and numerical operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point {point:?} lies outside the chart domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("forms live on different charts")]
    ChartMismatch,
    #[error("degree overflow: {0} + {1} exceeds dimension {2}")]
    DegreeOverflow(usize, usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("singular matrix (|det| = {0:e})")]
    Singular(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("metric signature does not admit an orthonormal frame with a timelike first leg")]
    BadSignature,
    #[error("third-derivative quantities require analytic partials")]
    NeedsAnalyticPartials,
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("G is not closed: max |dG| = {0:e}")]
    NotClosed(f64),
    #[error("quadrature did not converge (estimated error {0:e})")]
    Quadrature(f64),
    #[error("Picard iteration is not contracting; iterate distances {0:?}")]
    NonContraction(Vec<f64>),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("conformal base metric is not flat (max |R_h| = {0:e})")]
    NotFlat(f64),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: &str) -> Error {
    Error::Invalid(String::from(msg))
}

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("point lies on or outside the boundary; tail weight is singular")]
    BoundaryPoint,

    #[error("singular kernel evaluation: {0}")]
    SingularKernel(String),

    #[error("ball of radius {radius} around the origin is not contained in the domain")]
    BallNotContained { radius: f64 },

    #[error("truncation radius {rmax} does not cover the profile support {support}")]
    InsufficientTruncation { rmax: f64, support: f64 },

    #[error("search exhausted: {0}")]
    SearchExhausted(String),

    #[error("solver failed: {0}")]
    SolverFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

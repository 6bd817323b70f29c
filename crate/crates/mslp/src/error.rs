use thiserror::Error;

/// Errors raised by model construction, estimation, and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// All design points are equal, so the corrected sum of squares is zero
    /// and no slope can be estimated.
    #[error("degenerate design: all x values are equal (s_xx = 0)")]
    DegenerateDesign,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A covariance matrix failed its triangular square-root factorization.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("point index {index} out of range (design has {n} points)")]
    IndexOutOfRange { index: usize, n: usize },

    /// Control-limit calibration could not bracket the target ARL.
    #[error("no bracket: target ARL {target} is not attainable with a limit in (0, {max_limit}]")]
    NoBracket { target: f64, max_limit: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

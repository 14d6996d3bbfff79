use alloc::boxed::Box;
use alloc::string::String;

use crate::estimators::RegressionFit;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("matrix is not positive definite (pivot {index} below floor)")]
    NotPositiveDefinite { index: usize },
    #[error("design matrix is rank deficient (column {column} is collinear with earlier columns)")]
    RankDeficient { column: usize },
    #[error("{0} is singular")]
    Singular(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("M-estimator did not converge after {} iterations", .0.iterations)]
    NotConverged(Box<RegressionFit>),
    #[error("robust scale is zero (degenerate residuals)")]
    ZeroScale,
    #[error("sandwich M matrix is singular (all observations downweighted)")]
    DegenerateSandwich,
    #[error("D'ΩD vanishes; K statistic direction is degenerate")]
    DegenerateDirection,
    #[error("confidence-set grid is empty or invalid")]
    EmptyGrid,
    #[error("{failures} of {attempted} replications failed (limit 1%): {last}")]
    TooManyFailures {
        failures: usize,
        attempted: usize,
        last: String,
    },
}

impl Error {
    /// True for errors caused by malformed input rather than numerical trouble.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::RankDeficient { .. }
                | Error::InvalidArgument(_)
                | Error::Domain(_)
                | Error::EmptyInput(_)
                | Error::EmptyGrid
        )
    }
}

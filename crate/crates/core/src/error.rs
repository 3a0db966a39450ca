use thiserror::Error;

use crate::solvers::SolveResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {}", .0.join("; "))]
    InvalidGraph(Vec<String>),

    #[error("unknown vertex id `{0}`")]
    UnknownVertex(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("functional does not annihilate constants (sum {sum:e} against scale {scale:e})")]
    NotSumZero { sum: f64, scale: f64 },

    #[error("degenerate radius grid: {0}")]
    DegenerateGrid(String),

    #[error(
        "solver did not converge after {} iterations (residual {:e})",
        .0.iterations,
        .0.el_residual
    )]
    NotConverged(Box<SolveResult>),

    #[error("brute-force search supports at most 6 variables, got {0}")]
    TooManyDimensions(usize),

    #[error("vertex set is empty")]
    EmptySet,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by the data handed in, as opposed to the numerics.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::NotConverged(_) | Error::Numerical(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGraph(_) => "invalid_graph",
            Error::UnknownVertex(_) => "unknown_vertex",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NotSumZero { .. } => "not_sum_zero",
            Error::DegenerateGrid(_) => "degenerate_grid",
            Error::NotConverged(_) => "not_converged",
            Error::TooManyDimensions(_) => "too_many_dimensions",
            Error::EmptySet => "empty_set",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Numerical(_) => "numerical",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

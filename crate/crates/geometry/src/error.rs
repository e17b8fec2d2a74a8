use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("constraint {index} has a zero normal vector")]
    ZeroNormal { index: usize },

    #[error("polytope has no constraints")]
    NoConstraints,

    #[error("polytope must have dimension >= 1")]
    ZeroDimension,

    #[error("simplex stalled after {pivots} pivots ({rows} rows, {cols} columns)")]
    SolverStalled { pivots: usize, rows: usize, cols: usize },

    #[error("polytope is unbounded along direction {direction:?}")]
    Unbounded { direction: Vec<f64> },

    #[error("polytope is empty")]
    Empty,

    #[error("operation requires dimension {required}, polytope has dimension {dim}")]
    UnsupportedDimension { required: &'static str, dim: usize },
}

pub type Result<T> = std::result::Result<T, GeometryError>;

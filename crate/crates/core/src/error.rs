use thiserror::Error;

/// Errors raised across the segmentation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate clustering: {0}")]
    DegenerateClustering(String),

    #[error("field is not binary: value {value} at index {index}")]
    NonBinary { index: usize, value: f64 },

    #[error("field has {got} values, discretization expects {expected}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("step size violation: tau * sigma * ||Lambda||^2 bound = {product} >= 1")]
    StepSize { product: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("dual field infeasible (max |q| = {max_norm}); certificate void")]
    Infeasible { max_norm: f64 },

    #[error("point ({x}, {y}) lies outside the unit square")]
    OutOfDomain { x: f64, y: f64 },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("oracle lattice too large: {dofs} degrees of freedom (limit {limit})")]
    OracleTooLarge { dofs: usize, limit: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

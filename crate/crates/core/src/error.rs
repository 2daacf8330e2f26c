use thiserror::Error;

/// Errors raised by the solvers and diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value {value} at index {index} in {what}")]
    NonFinite {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("film height must be positive, found h = {value} at index {index}")]
    NonPositiveHeight { index: usize, value: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("derivative order {0} not supported (expected 1..=4)")]
    DerivativeOrder(usize),

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("linear system is singular or indefinite: {0}")]
    Singular(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("degenerate bound: {0}")]
    DegenerateBound(String),

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

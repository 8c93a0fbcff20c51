use thiserror::Error;

/// Errors raised by the capillary geometry and solver routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("field lives on a different cap domain")]
    DomainMismatch,

    #[error("index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("support function not positive: min {min:.3e} at node {node}")]
    Positivity { node: usize, min: f64 },

    #[error("capillary boundary condition violated: robin residual {residual:.3e} > {tol:.3e}")]
    Robin { residual: f64, tol: f64 },

    #[error("strict convexity violated at node {node}: smallest tau eigenvalue {eigenvalue:.3e}")]
    Convexity { node: usize, eigenvalue: f64 },

    #[error("field is not even: residual {0:.3e}")]
    Evenness(f64),

    #[error("non-finite value at node {0}")]
    NonFinite(usize),

    #[error("newton did not converge after {iterations} steps, last relative residual {residual:.3e}")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("newton damping exhausted after {halvings} halvings at step {iteration} (residual {residual:.3e})")]
    DampingExhausted {
        iteration: usize,
        halvings: usize,
        residual: f64,
    },

    #[error("singular linear system (pivot {pivot:.3e} at row {row})")]
    Singular { row: usize, pivot: f64 },

    #[error("not supported: {0}")]
    Unsupported(String),

    #[error("phi spec error at position {position}: {message}")]
    Grammar { position: usize, message: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("body is not near a fixed point: residual {residual:.3e} > {tol:.3e}")]
    NotFixedPoint { residual: f64, tol: f64 },

    #[error("curvature diagnostic blew up at step {step}: max sigma_1 {value:.3e} > {bound:.3e}")]
    CurvatureBlowup { step: usize, value: f64, bound: f64 },
}

pub type Result<T> = std::result::Result<T, CapError>;

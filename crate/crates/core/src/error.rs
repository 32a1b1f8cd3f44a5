use thiserror::Error;

/// Errors produced by the geometry, solver, inference and I/O layers.
#[derive(Debug, Error)]
pub enum BwError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e}, tolerance {tolerance:.3e})")]
    NotHermitian { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:.6e}, tolerance {tolerance:.3e})")]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },

    #[error("matrix is not strictly positive definite (min eigenvalue {min_eigenvalue:.6e}, threshold {threshold:.3e})")]
    Singular { min_eigenvalue: f64, threshold: f64 },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("solver did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("iterate lost positive definiteness after {halvings} step halvings (min eigenvalue {min_eigenvalue:.3e})")]
    PositivityLost { halvings: usize, min_eigenvalue: f64 },

    #[error("degenerate covariance operator: {0}")]
    DegenerateCovariance(String),

    #[error("replicate failures exceed 1% at n = {n}: {failures} of {replicates}")]
    TooManyFailures { n: usize, failures: usize, replicates: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("matrix {index}: {source}")]
    InMatrix {
        index: usize,
        #[source]
        source: Box<BwError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl BwError {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            BwError::NoConvergence { .. }
            | BwError::PositivityLost { .. }
            | BwError::DegenerateCovariance(_)
            | BwError::TooManyFailures { .. } => true,
            BwError::InMatrix { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn in_matrix(self, index: usize) -> Self {
        BwError::InMatrix {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, BwError>;

use alloc::string::String;
use core::fmt;

/// Errors produced by the linear algebra kernel and the estimators.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A matrix or vector had an unexpected shape.
    ShapeMismatch(String),
    /// Input contained NaN or infinite entries.
    NonFinite,
    /// A square matrix was required.
    NotSquare { rows: usize, cols: usize },
    /// Input was not symmetric within tolerance.
    NotSymmetric { max_asymmetry: f64 },
    /// The Jacobi iteration did not converge within the sweep cap.
    NoConvergence { residual: f64 },
    /// Cholesky factorization hit a pivot below tolerance; the matrix is
    /// singular or indefinite.
    Singular { pivot_index: usize, pivot: f64 },
    /// An argument was out of range.
    InvalidArgument(String),
    /// Estimation needs at least `min` samples (n >= 2p).
    TooFewSamples { n: usize, min: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::NonFinite => write!(f, "input contains NaN or infinite entries"),
            Error::NotSquare { rows, cols } => {
                write!(f, "matrix must be square, got {rows}x{cols}")
            }
            Error::NotSymmetric { max_asymmetry } => {
                write!(f, "matrix is not symmetric (max asymmetry {max_asymmetry:e})")
            }
            Error::NoConvergence { residual } => {
                write!(f, "eigensolver did not converge (off-diagonal residual {residual:e})")
            }
            Error::Singular { pivot_index, pivot } => write!(
                f,
                "matrix is singular or indefinite (pivot {pivot:e} at index {pivot_index}); \
                 more or richer samples may be needed"
            ),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::TooFewSamples { n, min } => {
                write!(f, "estimation needs at least {min} samples, got {n}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

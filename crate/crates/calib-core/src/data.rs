//! Domain types: sample matrices, augmented forms, and affine transforms.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Which estimator produced a [`CalibrationResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    GleserWatson,
    LeastSquares,
    Hybrid,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::GleserWatson => "gleser-watson",
            Method::LeastSquares => "least-squares",
            Method::Hybrid => "hybrid",
        }
    }
}

/// A set of `n` sample vectors from one measurement system, stored as the
/// columns of a `q x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Matrix,
}

impl DataMatrix {
    /// Builds estimation input; requires `n >= 2 * (q + 1)`.
    pub fn for_estimation(values: Matrix) -> Result<Self> {
        let min = 2 * (values.rows() + 1);
        if values.cols() < min {
            return Err(Error::TooFewSamples {
                n: values.cols(),
                min,
            });
        }
        Ok(Self { values })
    }

    /// Builds apply-only data with no sample-count floor.
    pub fn for_apply(values: Matrix) -> Self {
        Self { values }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }
}

/// A `p x n` matrix (`p = q + 1`) whose last row carries the constant-1
/// augmentation coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedData {
    values: Matrix,
}

impl AugmentedData {
    pub(crate) fn from_matrix(values: Matrix) -> Self {
        debug_assert!((0..values.cols()).all(|j| values[(values.rows() - 1, j)] == 1.0));
        Self { values }
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }
}

/// The calibration map `T(x) = A x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTransform {
    a: Matrix,
    b: Vec<f64>,
}

impl AffineTransform {
    pub fn new(a: Matrix, b: Vec<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        if b.len() != a.rows() {
            return Err(Error::ShapeMismatch(format!(
                "translation has {} entries, expected {}",
                b.len(),
                a.rows()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { a, b })
    }

    pub fn identity(q: usize) -> Self {
        Self {
            a: Matrix::identity(q),
            b: alloc::vec![0.0; q],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// The inverse map `(A^-1, -A^-1 b)`, if `A` is invertible.
    pub fn inverse(&self) -> Result<AffineTransform> {
        let q = self.dim();
        // solve A * Z = [I | b] via the normal equations of A itself is not
        // applicable (A need not be SPD); use Gaussian elimination on the
        // small dense system.
        let mut aug = Matrix::zeros(q, 2 * q + 1);
        for i in 0..q {
            for j in 0..q {
                aug[(i, j)] = self.a[(i, j)];
            }
            aug[(i, q + i)] = 1.0;
            aug[(i, 2 * q)] = self.b[i];
        }
        gauss_eliminate(&mut aug, q)?;
        let a_inv = aug.block(0, q, q, 2 * q);
        let b_inv: Vec<f64> = (0..q).map(|i| -aug[(i, 2 * q)]).collect();
        AffineTransform::new(a_inv, b_inv)
    }
}

/// In-place Gauss-Jordan with partial pivoting on `[A | rest]`.
fn gauss_eliminate(aug: &mut Matrix, q: usize) -> Result<()> {
    let cols = aug.cols();
    for k in 0..q {
        let mut piv = k;
        for i in (k + 1)..q {
            if libm::fabs(aug[(i, k)]) > libm::fabs(aug[(piv, k)]) {
                piv = i;
            }
        }
        if libm::fabs(aug[(piv, k)]) < 1e-300 {
            return Err(Error::Singular {
                pivot_index: k,
                pivot: aug[(piv, k)],
            });
        }
        if piv != k {
            for j in 0..cols {
                let tmp = aug[(k, j)];
                aug[(k, j)] = aug[(piv, j)];
                aug[(piv, j)] = tmp;
            }
        }
        let d = aug[(k, k)];
        for j in 0..cols {
            aug[(k, j)] /= d;
        }
        for i in 0..q {
            if i == k {
                continue;
            }
            let f = aug[(i, k)];
            if f == 0.0 {
                continue;
            }
            for j in 0..cols {
                aug[(i, j)] -= f * aug[(k, j)];
            }
        }
    }
    Ok(())
}

/// The `p x p` matrix `B = [A b; 0^T 1]` that expresses an affine map in
/// linear form.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedTransform {
    bmat: Matrix,
}

impl AugmentedTransform {
    /// Lifts `(A, b)` into the augmented matrix.
    pub fn from_affine(t: &AffineTransform) -> Self {
        let q = t.dim();
        let mut bmat = Matrix::zeros(q + 1, q + 1);
        for i in 0..q {
            for j in 0..q {
                bmat[(i, j)] = t.a()[(i, j)];
            }
            bmat[(i, q)] = t.b()[i];
        }
        bmat[(q, q)] = 1.0;
        Self { bmat }
    }

    /// Wraps an existing `p x p` matrix; the last row must be exactly
    /// `(0, ..., 0, 1)`.
    pub fn new(bmat: Matrix) -> Result<Self> {
        if !bmat.is_square() {
            return Err(Error::NotSquare {
                rows: bmat.rows(),
                cols: bmat.cols(),
            });
        }
        let p = bmat.rows();
        let last = bmat.row(p - 1);
        let ok = last[p - 1] == 1.0 && last[..p - 1].iter().all(|v| *v == 0.0);
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "augmented transform last row must be (0, ..., 0, 1), got {last:?}"
            )));
        }
        Ok(Self { bmat })
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.bmat.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.bmat
    }
}

/// Output of one estimator run: the transform, the estimated origins, and
/// fit diagnostics.
#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub transform: AffineTransform,
    /// Estimated origins of system 1, same shape as the `X` input.
    pub theta_e: DataMatrix,
    pub method: Method,
    /// Eigenvectors retained for denoising; 0 means no projection was applied.
    pub denoise_rank: usize,
    /// Max-abs deviation of the estimated B's last row from `(0, ..., 0, 1)`
    /// before extraction. Values above 1e-3 signal a model violation.
    pub bottom_row_deviation: f64,
    /// Eigenvalue condition number of the Gram matrix that was solved.
    pub gram_condition: f64,
}

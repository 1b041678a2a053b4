//! The three calibration estimators, the augmentation lifting, the
//! likelihood objective and its gradients, and transform application.
//!
//! All inputs store samples as columns. Estimation works on augmented
//! `p x n` matrices (`p = q + 1`) whose last row is constant 1, which turns
//! the affine map into a single linear matrix `B = [A b; 0^T 1]`.

use alloc::format;
use alloc::vec::Vec;

use crate::data::{
    AffineTransform, AugmentedData, AugmentedTransform, CalibrationResult, DataMatrix, Method,
};
use crate::eigen::{sym_eig, top_k_eigvecs};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::solve::solve_spd;

/// Above this sample count the signal subspace is computed from the small
/// `2p x 2p` outer-product problem instead of the `n x n` Gram matrix.
const DIRECT_GRAM_MAX_N: usize = 512;

/// Appends a constant-1 row to the samples, lifting them to `p x n`.
pub fn augment(x: &DataMatrix) -> AugmentedData {
    let (q, n) = (x.dim(), x.n_samples());
    let m = Matrix::from_fn(q + 1, n, |i, j| if i < q { x.values()[(i, j)] } else { 1.0 });
    AugmentedData::from_matrix(m)
}

/// Strips the augmentation row of `theta`, recovering a `q x n` DataMatrix.
pub fn deaugment(theta: &AugmentedData) -> DataMatrix {
    let p = theta.p();
    DataMatrix::for_apply(theta.values().block(0, p - 1, 0, theta.n_samples()))
}

/// Extracts `(A, b)` from the top-left block and last column of `B`.
pub fn deaugment_transform(bmat: &AugmentedTransform) -> AffineTransform {
    extract_affine(bmat.matrix()).0
}

/// Extraction from a free (estimated) `p x p` matrix whose last row may
/// deviate slightly from `(0, ..., 0, 1)`; returns the max-abs deviation as
/// a diagnostic.
fn extract_affine(bmat: &Matrix) -> (AffineTransform, f64) {
    let p = bmat.rows();
    let q = p - 1;
    let a = bmat.block(0, q, 0, q);
    let b: Vec<f64> = (0..q).map(|i| bmat[(i, q)]).collect();
    let mut dev = libm::fabs(bmat[(q, q)] - 1.0);
    for j in 0..q {
        dev = dev.max(libm::fabs(bmat[(q, j)]));
    }
    (
        AffineTransform::new(a, b).expect("extracted blocks are shape-consistent and finite"),
        dev,
    )
}

/// The least-squares objective
/// `f = tr[(X - T)(X - T)^T] + tr[(Y - B T)(Y - B T)^T]`
/// over augmented `p x n` matrices. The joint likelihood is
/// `(2 pi sigma^2)^(-n p) * exp(-f / (2 sigma^2))`; the normalization and
/// `sigma^2` play no role in any estimator here, so `f` is all we compute.
pub fn objective_f(x: &Matrix, y: &Matrix, theta: &Matrix, bmat: &Matrix) -> Result<f64> {
    check_objective_shapes(x, y, theta, bmat)?;
    let rx = x.sub(theta);
    let ry = y.sub(&bmat.matmul(theta));
    let (nx, ny) = (rx.frobenius_norm(), ry.frobenius_norm());
    Ok(nx * nx + ny * ny)
}

/// Gradient of [`objective_f`] in `theta`:
/// `-2 (X - T) - 2 B^T (Y - B T)`.
pub fn grad_f_theta(x: &Matrix, y: &Matrix, theta: &Matrix, bmat: &Matrix) -> Result<Matrix> {
    check_objective_shapes(x, y, theta, bmat)?;
    let rx = x.sub(theta).scaled(-2.0);
    let ry = bmat
        .transpose()
        .matmul(&y.sub(&bmat.matmul(theta)))
        .scaled(-2.0);
    Ok(rx.add(&ry))
}

/// Gradient of [`objective_f`] in `B`: `-2 (Y - B T) T^T`.
pub fn grad_f_bmat(x: &Matrix, y: &Matrix, theta: &Matrix, bmat: &Matrix) -> Result<Matrix> {
    check_objective_shapes(x, y, theta, bmat)?;
    Ok(y.sub(&bmat.matmul(theta))
        .matmul(&theta.transpose())
        .scaled(-2.0))
}

fn check_objective_shapes(x: &Matrix, y: &Matrix, theta: &Matrix, bmat: &Matrix) -> Result<()> {
    let (p, n) = (x.rows(), x.cols());
    if y.rows() != p || y.cols() != n || theta.rows() != p || theta.cols() != n {
        return Err(Error::ShapeMismatch(format!(
            "x {}x{}, y {}x{}, theta {}x{} must agree",
            p,
            n,
            y.rows(),
            y.cols(),
            theta.rows(),
            theta.cols()
        )));
    }
    if bmat.rows() != p || bmat.cols() != p {
        return Err(Error::ShapeMismatch(format!(
            "B is {}x{}, expected {p}x{p}",
            bmat.rows(),
            bmat.cols()
        )));
    }
    Ok(())
}

/// Leading eigenvectors of the sample-space Gram matrix `X^T X + Y^T Y`
/// computed directly at `n x n`. `x` and `y` are augmented `p x n`.
pub fn gram_top_eigvecs_direct(x: &Matrix, y: &Matrix, k: usize) -> Result<Matrix> {
    let gram = x
        .transpose()
        .matmul(x)
        .add(&y.transpose().matmul(y));
    top_k_eigvecs(&gram, k)
}

/// Same subspace through the `2p x 2p` outer-product problem: with
/// `S = [X; Y]`, the top right-singular vectors of `S` are recovered from the
/// eigenvectors of `S S^T`. Requires `k <= 2p` and a Gram matrix of rank at
/// least `k`.
pub fn gram_top_eigvecs_reduced(x: &Matrix, y: &Matrix, k: usize) -> Result<Matrix> {
    let p2 = x.rows() + y.rows();
    if k > p2 {
        return Err(Error::InvalidArgument(format!(
            "reduced path supports rank up to 2p = {p2}, got {k}"
        )));
    }
    let s = x.vstack(y);
    let outer = s.matmul(&s.transpose());
    let eig = sym_eig(&outer)?;
    let rank_tol = 1e-12 * outer.trace().max(1.0);
    let n = s.cols();
    let mut u = Matrix::zeros(n, k);
    for j in 0..k {
        let lambda = eig.values[j];
        if lambda <= rank_tol {
            return Err(Error::Singular {
                pivot_index: j,
                pivot: lambda,
            });
        }
        let inv_sigma = 1.0 / libm::sqrt(lambda);
        for i in 0..n {
            let mut dot = 0.0;
            for r in 0..p2 {
                dot += s[(r, i)] * eig.vectors[(r, j)];
            }
            u[(i, j)] = dot * inv_sigma;
        }
    }
    Ok(u)
}

/// Picks the cheaper of the two equivalent subspace computations.
fn signal_subspace(x: &Matrix, y: &Matrix, k: usize) -> Result<Matrix> {
    if x.cols() <= DIRECT_GRAM_MAX_N {
        gram_top_eigvecs_direct(x, y, k)
    } else {
        gram_top_eigvecs_reduced(x, y, k)
    }
}

/// Augmented Gleser-Watson estimator: origins from the projection onto the
/// `p` leading eigenvectors of `X^T X + Y^T Y`, transform from the
/// multivariate regression of `Y` on the estimated origins.
///
/// With `denoise` set, the augmentation row of the projected origins is
/// restored to exact ones before the regression; without it the classic
/// augmented Gleser-Watson baseline is reproduced.
pub fn fit_gleser_watson(
    x: &DataMatrix,
    y: &DataMatrix,
    denoise: bool,
) -> Result<CalibrationResult> {
    check_paired(x, y)?;
    let p = x.dim() + 1;
    let x_aug = augment(x);
    let y_aug = augment(y);

    let u = signal_subspace(x_aug.values(), y_aug.values(), p)?;
    // Theta = X U U^T, formed as (X U) U^T to stay at p x p intermediates
    let mut theta = x_aug.values().matmul(&u).matmul(&u.transpose());
    if denoise {
        for j in 0..theta.cols() {
            theta[(p - 1, j)] = 1.0;
        }
    }

    let (bmat, gram_condition) = regress_transform(y_aug.values(), &theta)?;
    finish(x, bmat, theta, Method::GleserWatson, p, gram_condition)
}

/// Simple least-squares estimator: `B = Y X^T (X X^T)^-1` on augmented data,
/// origins taken as the raw measurements.
pub fn fit_least_squares(x: &DataMatrix, y: &DataMatrix) -> Result<CalibrationResult> {
    check_paired(x, y)?;
    let x_aug = augment(x);
    let y_aug = augment(y);
    let (bmat, gram_condition) = regress_transform(y_aug.values(), x_aug.values())?;
    finish(
        x,
        bmat,
        x_aug.values().clone(),
        Method::LeastSquares,
        0,
        gram_condition,
    )
}

/// Hybrid estimator: least-squares transform combined with the
/// eigenprojection estimate of the origins.
///
/// `denoise_rank` defaults to `p`. Rank `n` (all eigenvectors) reduces the
/// projector to the identity, so the origins collapse to the measurements and
/// the result coincides with [`fit_least_squares`]. For `n` beyond the direct
/// Gram path, intermediate ranks above `2p` are not representable and are
/// rejected.
pub fn fit_hybrid(
    x: &DataMatrix,
    y: &DataMatrix,
    denoise_rank: Option<usize>,
) -> Result<CalibrationResult> {
    check_paired(x, y)?;
    let p = x.dim() + 1;
    let n = x.n_samples();
    let k = denoise_rank.unwrap_or(p);
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "denoise rank must be in 1..={n}, got {k}"
        )));
    }
    let x_aug = augment(x);
    let y_aug = augment(y);

    let theta = if k == n {
        x_aug.values().clone()
    } else if n <= DIRECT_GRAM_MAX_N || k <= 2 * p {
        let v = signal_subspace(x_aug.values(), y_aug.values(), k)?;
        x_aug.values().matmul(&v).matmul(&v.transpose())
    } else {
        return Err(Error::InvalidArgument(format!(
            "denoise rank {k} is not supported for n = {n} samples (use up to 2p = {} or \
             the full rank {n})",
            2 * p
        )));
    };

    let (bmat, gram_condition) = regress_transform(y_aug.values(), x_aug.values())?;
    finish(x, bmat, theta, Method::Hybrid, k, gram_condition)
}

/// `B = Y T^T (T T^T)^-1` via a Cholesky solve on the `p x p` Gram matrix.
fn regress_transform(y: &Matrix, theta: &Matrix) -> Result<(Matrix, f64)> {
    let gram = theta.matmul(&theta.transpose());
    let rhs = theta.matmul(&y.transpose());
    let bt = solve_spd(&gram, &rhs)?;
    let cond = match sym_eig(&gram) {
        Ok(eig) => {
            let max = eig.values.first().copied().unwrap_or(0.0);
            let min = eig.values.last().copied().unwrap_or(0.0);
            if min > 0.0 {
                max / min
            } else {
                f64::INFINITY
            }
        }
        Err(_) => f64::NAN,
    };
    Ok((bt.transpose(), cond))
}

fn finish(
    x: &DataMatrix,
    bmat: Matrix,
    theta: Matrix,
    method: Method,
    denoise_rank: usize,
    gram_condition: f64,
) -> Result<CalibrationResult> {
    let (transform, bottom_row_deviation) = extract_affine(&bmat);
    if bottom_row_deviation > 1e-3 {
        log::warn!(
            "estimated B deviates from an affine lift by {bottom_row_deviation:e} in its last \
             row; the measurement model may be violated"
        );
    }
    let q = x.dim();
    let theta_e = DataMatrix::for_apply(theta.block(0, q, 0, theta.cols()));
    Ok(CalibrationResult {
        transform,
        theta_e,
        method,
        denoise_rank,
        bottom_row_deviation,
        gram_condition,
    })
}

fn check_paired(x: &DataMatrix, y: &DataMatrix) -> Result<()> {
    if x.dim() != y.dim() || x.n_samples() != y.n_samples() {
        return Err(Error::ShapeMismatch(format!(
            "x is {}x{}, y is {}x{}; paired data must match",
            x.dim(),
            x.n_samples(),
            y.dim(),
            y.n_samples()
        )));
    }
    Ok(())
}

/// Applies `T(x) = A x + b` to every column.
pub fn apply_transform(t: &AffineTransform, x: &DataMatrix) -> Result<DataMatrix> {
    if t.dim() != x.dim() {
        return Err(Error::ShapeMismatch(format!(
            "transform dimension {} does not match data dimension {}",
            t.dim(),
            x.dim()
        )));
    }
    let mut out = t.a().matmul(x.values());
    for i in 0..out.rows() {
        for j in 0..out.cols() {
            out[(i, j)] += t.b()[i];
        }
    }
    Ok(DataMatrix::for_apply(out))
}

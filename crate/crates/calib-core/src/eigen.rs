//! Symmetric eigendecomposition via cyclic Jacobi rotations.
//!
//! Dimensions in this crate are small (typically p = q+1 = 3, or a Gram
//! matrix of a few hundred), where Jacobi delivers orthonormal eigenvectors
//! to machine precision.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MAX_SWEEPS: usize = 100;

/// Full eigendecomposition of a symmetric matrix.
///
/// `values` are sorted descending; column `i` of `vectors` is the unit
/// eigenvector paired with `values[i]`. Eigenvector signs follow the
/// convention "largest-magnitude entry positive" so serialized output is
/// reproducible; downstream math only consumes the projector U*U^T, which is
/// sign-invariant.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.
///
/// Converges when the off-diagonal Frobenius norm drops below
/// `1e-12 * ||S||_F`, capped at 100 sweeps.
pub fn sym_eig(s: &Matrix) -> Result<EigenResult> {
    s.check_symmetric()?;
    let n = s.rows();
    let norm = s.frobenius_norm();
    let tol = 1e-12 * norm;

    let mut a = s.clone();
    // enforce exact symmetry so the rotations stay consistent
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
    let mut v = Matrix::identity(n);

    let mut converged = norm == 0.0 || n == 1;
    if !converged {
        for _sweep in 0..MAX_SWEEPS {
            if off_diagonal_norm(&a) <= tol {
                converged = true;
                break;
            }
            for p in 0..n - 1 {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if libm::fabs(apq) <= tol / (n as f64) {
                        continue;
                    }
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > tol {
        return Err(Error::NoConvergence {
            residual: off_diagonal_norm(&a),
        });
    }

    // sort descending; stable so tied eigenvalues keep sweep order
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());

    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    fix_signs(&mut vectors);

    Ok(EigenResult { values, vectors })
}

/// Eigenvectors of the `k` largest eigenvalues, as columns, descending.
pub fn top_k_eigvecs(s: &Matrix, k: usize) -> Result<Matrix> {
    if k == 0 || k > s.rows() {
        return Err(Error::InvalidArgument(format!(
            "k must be in 1..={}, got {k}",
            s.rows()
        )));
    }
    let eig = sym_eig(s)?;
    Ok(eig.vectors.block(0, s.rows(), 0, k))
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += 2.0 * a[(i, j)] * a[(i, j)];
        }
    }
    libm::sqrt(sum)
}

/// One Jacobi rotation annihilating `a[(p, q)]`, accumulated into `v`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let n = a.rows();
    let apq = a[(p, q)];
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = if theta >= 0.0 {
        1.0 / (theta + libm::sqrt(theta * theta + 1.0))
    } else {
        -1.0 / (-theta + libm::sqrt(theta * theta + 1.0))
    };
    let c = 1.0 / libm::sqrt(t * t + 1.0);
    let s = t * c;
    let tau = s / (1.0 + c);

    a[(p, p)] -= t * apq;
    a[(q, q)] += t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for i in 0..n {
        if i == p || i == q {
            continue;
        }
        let aip = a[(i, p)];
        let aiq = a[(i, q)];
        let new_p = aip - s * (aiq + tau * aip);
        let new_q = aiq + s * (aip - tau * aiq);
        a[(i, p)] = new_p;
        a[(p, i)] = new_p;
        a[(i, q)] = new_q;
        a[(q, i)] = new_q;
    }
    for i in 0..n {
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = vip - s * (viq + tau * vip);
        v[(i, q)] = viq + s * (vip - tau * viq);
    }
}

/// Flip each column so its largest-magnitude entry is positive.
fn fix_signs(vectors: &mut Matrix) {
    let (n, k) = (vectors.rows(), vectors.cols());
    for j in 0..k {
        let mut best = 0usize;
        let mut best_abs = 0.0;
        for i in 0..n {
            let a = libm::fabs(vectors[(i, j)]);
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if vectors[(best, j)] < 0.0 {
            for i in 0..n {
                vectors[(i, j)] = -vectors[(i, j)];
            }
        }
    }
}

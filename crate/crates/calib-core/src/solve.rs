//! Linear solves for symmetric positive definite systems via Cholesky
//! factorization. The estimators never form explicit inverses.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Solves `G * Z = RHS` for SPD `G` by Cholesky factorization.
///
/// A pivot below `1e-12 * trace(G) / dim` flags the matrix as singular or
/// indefinite, carrying the offending pivot index.
pub fn solve_spd(g: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    g.check_symmetric()?;
    let n = g.rows();
    if rhs.rows() != n {
        return Err(Error::ShapeMismatch(alloc::format!(
            "rhs has {} rows, expected {n}",
            rhs.rows()
        )));
    }
    let l = cholesky(g)?;

    // forward then back substitution, column by column
    let m = rhs.cols();
    let mut z = Matrix::zeros(n, m);
    for c in 0..m {
        for i in 0..n {
            let mut s = rhs[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * z[(k, c)];
            }
            z[(i, c)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = z[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * z[(k, c)];
            }
            z[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(z)
}

/// Lower-triangular Cholesky factor of an SPD matrix.
fn cholesky(g: &Matrix) -> Result<Matrix> {
    let n = g.rows();
    let pivot_tol = 1e-12 * g.trace() / n as f64;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= pivot_tol {
                    return Err(Error::Singular {
                        pivot_index: i,
                        pivot: s,
                    });
                }
                l[(i, i)] = libm::sqrt(s);
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn identity_passthrough() {
        let rhs = Matrix::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let z = solve_spd(&Matrix::identity(3), &rhs).unwrap();
        assert!(z.sub(&rhs).frobenius_norm() < 1e-14);
    }

    #[test]
    fn diagonal_solve() {
        let g = Matrix::new(2, 2, vec![2.0, 0.0, 0.0, 4.0]).unwrap();
        let rhs = Matrix::new(2, 1, vec![2.0, 4.0]).unwrap();
        let z = solve_spd(&g, &rhs).unwrap();
        assert!((z[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((z[(1, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_reports_pivot() {
        let g = Matrix::new(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let rhs = Matrix::new(2, 1, vec![1.0, 1.0]).unwrap();
        match solve_spd(&g, &rhs).unwrap_err() {
            Error::Singular { pivot_index, .. } => assert_eq!(pivot_index, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn indefinite_rejected() {
        let g = Matrix::new(2, 2, vec![1.0, 0.0, 0.0, -1.0]).unwrap();
        let rhs = Matrix::new(2, 1, vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            solve_spd(&g, &rhs).unwrap_err(),
            Error::Singular { .. }
        ));
    }
}

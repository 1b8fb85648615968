//! Dense symmetric eigensolver (cyclic Jacobi).
//!
//! Jacobi rotations are slow for large matrices but converge quadratically and
//! deliver eigenvalues accurate to a small multiple of machine precision times
//! the spectral radius, which is what the bound needs for the dimensions we see
//! (a handful of assets, or twice the number of partition cells).

use nalgebra::DMatrix;

use crate::error::{BoundError, Result};

const MAX_SWEEPS: usize = 60;

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
///
/// `vectors` holds the eigenvectors as columns, in the same order as `values`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Eigenvalues of a symmetric matrix in descending order.
pub fn symmetric_eigenvalues(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(symmetric_eigen(p)?.values)
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Only the lower triangle is trusted to be consistent with the upper one; the
/// input is symmetrised before rotating.
pub fn symmetric_eigen(p: &DMatrix<f64>) -> Result<SymmetricEigen> {
    let n = p.nrows();
    if p.ncols() != n {
        return Err(BoundError::DimensionMismatch {
            expected: n,
            found: p.ncols(),
        });
    }
    if p.iter().any(|x| !x.is_finite()) {
        return Err(BoundError::InvalidMatrix("non-finite entry".into()));
    }

    let mut a = DMatrix::from_fn(n, n, |i, j| 0.5 * (p[(i, j)] + p[(j, i)]));
    let mut v = DMatrix::<f64>::identity(n, n);

    let norm2: f64 = a.iter().map(|x| x * x).sum();
    let target = (f64::EPSILON * f64::EPSILON) * norm2;

    let mut converged = n <= 1 || norm2 == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = off_diagonal_norm2(&a);
        if off <= target {
            converged = true;
            break;
        }
        for q in 1..n {
            for p_ in 0..q {
                rotate(&mut a, &mut v, p_, q);
            }
        }
    }
    if !converged && off_diagonal_norm2(&a) > target {
        return Err(BoundError::ConvergenceFailure { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

fn off_diagonal_norm2(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s
}

/// One Jacobi rotation annihilating `a[(p, q)]`.
fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    // Skip rotations that can no longer change the diagonal.
    if apq.abs() <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[(p, q)] = 0.0;
        a[(q, p)] = 0.0;
        return;
    }
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
    let c = 1.0 / t.hypot(1.0);
    let s = t * c;

    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

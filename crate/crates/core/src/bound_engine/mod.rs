//! Supremum bound for basket options from a moment matrix.
//!
//! Given the moment matrix `Q[m][n] = E[√(a_m a_n)]` and portfolio quantities
//! `λ_n`, the price of the option on `Σ λ_n a_n` is bounded above by the sum of
//! the positive eigenvalues of `P = S Λ Sᵀ`, where `Q = SᵀS`. The value does
//! not depend on which factor `S` is used.

mod eigen;
mod factor;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{BoundError, Result};

pub use eigen::{symmetric_eigen, symmetric_eigenvalues, SymmetricEigen};
pub use factor::{factor_psd, factor_psd_with, FactorMethod, FactorPath, PsdFactor};

/// Numerical tolerances shared by the engine and its callers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative size of negative eigenvalues of `Q` that are clipped to zero.
    pub psd_tol: f64,
    /// Relative reconstruction error accepted from the pivoted Cholesky route.
    pub factor_tol: f64,
    /// Eigenvalues of `P` within `eig_tol` times the spectral radius count as zero.
    pub eig_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            psd_tol: 1e-10,
            factor_tol: 1e-10,
            eig_tol: 1e-12,
        }
    }
}

/// Symmetric matrix of pairwise moments `E[√(a_m a_n)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    entries: DMatrix<f64>,
}

impl MomentMatrix {
    /// Wraps a matrix after checking it is square, finite, exactly symmetric
    /// and has a strictly positive diagonal. Semi-definiteness is checked when
    /// the matrix is factored.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(BoundError::DimensionMismatch {
                expected: n,
                found: entries.ncols(),
            });
        }
        if n == 0 {
            return Err(BoundError::InvalidMatrix("empty moment matrix".into()));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(BoundError::InvalidMatrix("non-finite entry".into()));
        }
        for i in 0..n {
            if entries[(i, i)] <= 0.0 {
                return Err(BoundError::InvalidMatrix(format!(
                    "diagonal entry {i} = {} is not positive",
                    entries[(i, i)]
                )));
            }
            for j in 0..i {
                if entries[(i, j)] != entries[(j, i)] {
                    return Err(BoundError::InvalidMatrix(format!(
                        "entries ({i}, {j}) and ({j}, {i}) differ"
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(BoundError::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn max_diagonal(&self) -> f64 {
        self.entries.diagonal().iter().copied().fold(0.0, f64::max)
    }

    /// `c · Q` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.entries * c)
    }
}

/// Signed portfolio quantities `λ_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantityVector(Vec<f64>);

impl QuantityVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(BoundError::InvalidMatrix("non-finite quantity".into()));
        }
        Ok(Self(weights))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<QuantityVector> for Vec<f64> {
    fn from(q: QuantityVector) -> Self {
        q.0
    }
}

/// Outcome of a bound evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    /// Sum of the positive eigenvalues of `P`.
    pub bound: f64,
    /// Eigenvalues of `P`, descending.
    pub eigenvalues: Vec<f64>,
    /// Number of eigenvalues counted as positive.
    pub positive_count: usize,
    pub rank_q: usize,
    pub clipped_negative_mass: f64,
    pub factor_path: FactorPath,
}

/// `P = S Λ Sᵀ` for the factor `S` of `Q`.
pub fn transfer_matrix(factor: &PsdFactor, lambda: &QuantityVector) -> Result<DMatrix<f64>> {
    let s = &factor.factor;
    if lambda.len() != s.ncols() {
        return Err(BoundError::DimensionMismatch {
            expected: s.ncols(),
            found: lambda.len(),
        });
    }
    let weighted = s * DMatrix::from_diagonal(&DVector::from_column_slice(lambda.as_slice()));
    let p = weighted * s.transpose();
    // Exact symmetry so the eigensolver sees a symmetric input bit for bit.
    Ok(DMatrix::from_fn(p.nrows(), p.ncols(), |i, j| {
        if i <= j {
            p[(i, j)]
        } else {
            p[(j, i)]
        }
    }))
}

/// Sum of positive eigenvalues of `P = S Λ Sᵀ` with the default factorisation.
pub fn positive_eigenvalue_bound(
    q: &MomentMatrix,
    lambda: &QuantityVector,
    tol: &Tolerances,
) -> Result<BoundResult> {
    positive_eigenvalue_bound_with(q, lambda, FactorMethod::Auto, tol)
}

pub fn positive_eigenvalue_bound_with(
    q: &MomentMatrix,
    lambda: &QuantityVector,
    method: FactorMethod,
    tol: &Tolerances,
) -> Result<BoundResult> {
    if lambda.len() != q.dim() {
        return Err(BoundError::DimensionMismatch {
            expected: q.dim(),
            found: lambda.len(),
        });
    }
    let factor = factor_psd_with(q, method, tol)?;
    let p = transfer_matrix(&factor, lambda)?;
    let eigenvalues = symmetric_eigenvalues(&p)?;
    let zero = zero_threshold(&eigenvalues, tol);
    let positive: Vec<f64> = eigenvalues.iter().copied().filter(|&v| v > zero).collect();
    Ok(BoundResult {
        bound: positive.iter().sum(),
        positive_count: positive.len(),
        eigenvalues,
        rank_q: factor.rank,
        clipped_negative_mass: factor.clipped_negative_mass,
        factor_path: factor.path,
    })
}

/// Eigenvalues with magnitude at or below this value count as zero.
pub fn zero_threshold(eigenvalues: &[f64], tol: &Tolerances) -> f64 {
    let radius = eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    tol.eig_tol * radius
}

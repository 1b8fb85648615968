//! Rank-revealing factorisation `Q = SᵀS` of a positive semi-definite moment matrix.

use nalgebra::DMatrix;

use super::eigen::symmetric_eigen;
use super::{MomentMatrix, Tolerances};
use crate::error::{BoundError, Result};

/// Which factorisation to attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FactorMethod {
    /// Pivoted Cholesky, falling back to the eigen square root on breakdown.
    #[default]
    Auto,
    PivotedCholesky,
    EigenSqrt,
}

/// The factorisation that actually produced `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorPath {
    PivotedCholesky,
    EigenSqrt,
}

/// A factor `S` with `rank` rows such that `SᵀS ≈ Q`.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    pub factor: DMatrix<f64>,
    pub rank: usize,
    pub path: FactorPath,
    /// Magnitude of the spectrum discarded to make `Q` exactly semi-definite.
    /// For the eigen route this is the sum of the clipped negative eigenvalues;
    /// for the Cholesky route it is the sum of the residual pivots left over
    /// after rank truncation.
    pub clipped_negative_mass: f64,
}

/// Factor `Q = SᵀS` using the default strategy.
pub fn factor_psd(q: &MomentMatrix, tol: &Tolerances) -> Result<PsdFactor> {
    factor_psd_with(q, FactorMethod::Auto, tol)
}

pub fn factor_psd_with(q: &MomentMatrix, method: FactorMethod, tol: &Tolerances) -> Result<PsdFactor> {
    match method {
        FactorMethod::EigenSqrt => eigen_sqrt(q, tol),
        FactorMethod::PivotedCholesky => pivoted_cholesky(q, tol).and_then(|f| {
            if reconstruction_ok(q, &f, tol) {
                Ok(f)
            } else {
                // Cholesky stopped early on a non-PSD remainder; the eigen route
                // produces the precise diagnostic.
                eigen_sqrt(q, tol)?;
                Err(BoundError::InvalidMatrix(
                    "pivoted Cholesky reconstruction failed".into(),
                ))
            }
        }),
        FactorMethod::Auto => match pivoted_cholesky(q, tol) {
            Ok(f) if reconstruction_ok(q, &f, tol) => Ok(f),
            _ => eigen_sqrt(q, tol),
        },
    }
}

fn reconstruction_ok(q: &MomentMatrix, f: &PsdFactor, tol: &Tolerances) -> bool {
    let back = f.factor.transpose() * &f.factor;
    let err = (back - q.as_matrix()).amax();
    err <= tol.factor_tol * q.max_diagonal()
}

fn pivoted_cholesky(q: &MomentMatrix, tol: &Tolerances) -> Result<PsdFactor> {
    let a = q.as_matrix();
    let n = a.nrows();
    let threshold = tol.psd_tol * q.max_diagonal();

    let mut residual: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    let mut chosen = vec![false; n];
    let mut r = DMatrix::<f64>::zeros(n, n);
    let mut rank = 0;

    while rank < n {
        let (pivot, &d) = residual
            .iter()
            .enumerate()
            .filter(|(i, _)| !chosen[*i])
            .max_by(|x, y| x.1.total_cmp(y.1).then(y.0.cmp(&x.0)))
            .expect("unchosen index exists while rank < n");
        if d <= threshold {
            break;
        }
        let root = d.sqrt();
        chosen[pivot] = true;
        r[(rank, pivot)] = root;
        for m in 0..n {
            if chosen[m] {
                continue;
            }
            let mut s = a[(pivot, m)];
            for l in 0..rank {
                s -= r[(l, pivot)] * r[(l, m)];
            }
            let v = s / root;
            r[(rank, m)] = v;
            residual[m] -= v * v;
        }
        rank += 1;
    }

    let clipped: f64 = (0..n)
        .filter(|&i| !chosen[i])
        .map(|i| residual[i].abs())
        .sum();
    if clipped.is_nan() {
        return Err(BoundError::InvalidMatrix("non-finite pivot".into()));
    }

    Ok(PsdFactor {
        factor: r.rows(0, rank).into_owned(),
        rank,
        path: FactorPath::PivotedCholesky,
        clipped_negative_mass: clipped,
    })
}

fn eigen_sqrt(q: &MomentMatrix, tol: &Tolerances) -> Result<PsdFactor> {
    let eig = symmetric_eigen(q.as_matrix())?;
    let n = q.dim();
    let psd_floor = tol.psd_tol * q.max_diagonal().max(1.0);
    let min = eig.values.last().copied().unwrap_or(0.0);
    if min < -psd_floor {
        return Err(BoundError::NotPositiveSemiDefinite {
            min_eigenvalue: min,
            tolerance: psd_floor,
        });
    }
    let keep = tol.psd_tol * q.max_diagonal();
    let kept: Vec<usize> = (0..n).filter(|&i| eig.values[i] > keep).collect();
    let clipped = eig
        .values
        .iter()
        .filter(|&&v| v < 0.0)
        .map(|v| -v)
        .sum();
    let factor = DMatrix::from_fn(kept.len(), n, |row, col| {
        let i = kept[row];
        eig.values[i].sqrt() * eig.vectors[(col, i)]
    });
    Ok(PsdFactor {
        rank: kept.len(),
        factor,
        path: FactorPath::EigenSqrt,
        clipped_negative_mass: clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mm(n: usize, rows: &[f64]) -> MomentMatrix {
        MomentMatrix::new(DMatrix::from_row_slice(n, n, rows)).unwrap()
    }

    fn check_reconstruction(q: &MomentMatrix, f: &PsdFactor, eps: f64) {
        let back = f.factor.transpose() * &f.factor;
        assert!((back - q.as_matrix()).amax() <= eps);
    }

    #[test]
    fn identity_factors_to_identity() {
        let q = mm(2, &[1.0, 0.0, 0.0, 1.0]);
        let f = factor_psd(&q, &Tolerances::default()).unwrap();
        assert_eq!(f.rank, 2);
        assert_eq!(f.path, FactorPath::PivotedCholesky);
        assert_eq!(f.factor, DMatrix::<f64>::identity(2, 2));
    }

    #[test]
    fn vanilla_pair_factor() {
        let c = 0.96_f64.sqrt();
        let q = mm(2, &[1.0, c, c, 1.0]);
        let f = factor_psd(&q, &Tolerances::default()).unwrap();
        check_reconstruction(&q, &f, 1e-12);
        // First pivot is the (tied) leading diagonal, so S = [[1, c], [0, 0.2]].
        assert!((f.factor[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((f.factor[(0, 1)] - c).abs() < 1e-15);
        assert!((f.factor[(1, 1)].abs() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn rank_one_detected() {
        let q = mm(2, &[1.0, 1.0, 1.0, 1.0]);
        let f = factor_psd(&q, &Tolerances::default()).unwrap();
        assert_eq!(f.rank, 1);
        assert_eq!(f.factor.nrows(), 1);
        assert!((f.factor[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((f.factor[(0, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let q = mm(2, &[1.0, 2.0, 2.0, 1.0]);
        let err = factor_psd(&q, &Tolerances::default()).unwrap_err();
        match err {
            BoundError::NotPositiveSemiDefinite { min_eigenvalue, .. } => {
                assert!((min_eigenvalue + 1.0).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(factor_psd_with(&q, FactorMethod::PivotedCholesky, &Tolerances::default()).is_err());
    }

    #[test]
    fn tiny_negative_eigenvalue_is_clipped() {
        // Rank-one matrix perturbed to have an eigenvalue of about -1e-13.
        let e = 1e-13;
        let q = mm(2, &[1.0, 1.0 + e, 1.0 + e, 1.0]);
        let f = factor_psd_with(&q, FactorMethod::EigenSqrt, &Tolerances::default()).unwrap();
        assert_eq!(f.rank, 1);
        assert!((f.clipped_negative_mass - e).abs() < 1e-15);
        check_reconstruction(&q, &f, 1e-12);
    }

    #[test]
    fn eigen_route_reconstructs() {
        let q = mm(3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5]);
        let f = factor_psd_with(&q, FactorMethod::EigenSqrt, &Tolerances::default()).unwrap();
        assert_eq!(f.path, FactorPath::EigenSqrt);
        check_reconstruction(&q, &f, 1e-14);
    }
}

//! Moment matrices from prices, root-variances and square-root correlations.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::bound_engine::{symmetric_eigenvalues, MomentMatrix, Tolerances};
use crate::error::{check_correlation, check_positive, check_unit_interval, BoundError, Result};

/// Price `f = E[a]` and root-variance `ν = (E[a] − E[√a]²) / E[a]` of one asset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssetMoments {
    price: f64,
    root_variance: f64,
}

impl AssetMoments {
    pub fn new(price: f64, root_variance: f64) -> Result<Self> {
        check_positive("price", price)?;
        check_unit_interval("root_variance", root_variance)?;
        Ok(Self {
            price,
            root_variance,
        })
    }

    /// Asset with known price and square-root moment.
    pub fn from_moments(e_a: f64, e_sqrt_a: f64, tol: &Tolerances) -> Result<Self> {
        Self::new(e_a, root_variance_from_moments(e_a, e_sqrt_a, tol)?)
    }

    pub fn price(&self) -> f64 {
        self.price
    }

    pub fn root_variance(&self) -> f64 {
        self.root_variance
    }

    /// `E[√a] = √(f(1−ν))`.
    pub fn sqrt_moment(&self) -> f64 {
        (self.price * (1.0 - self.root_variance)).sqrt()
    }
}

/// Square-root correlations `ρ_mn`, supplied pair by pair.
///
/// Pairs that are never set are missing rather than defaulted; a missing pair
/// is only an error when both assets carry variance.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    dim: usize,
    pairs: BTreeMap<(usize, usize), f64>,
}

impl CorrelationMatrix {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            pairs: BTreeMap::new(),
        }
    }

    /// Builds from a full matrix, checking symmetry and unit diagonal.
    pub fn from_full(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut out = Self::new(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(BoundError::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            if row[i] != 1.0 {
                return Err(BoundError::ParameterOutOfRange {
                    name: "correlation diagonal",
                    value: row[i],
                    expected: "exactly 1",
                });
            }
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(BoundError::InvalidMatrix(format!(
                        "correlation ({i}, {j}) and ({j}, {i}) differ"
                    )));
                }
                out.set(i, j, rows[i][j])?;
            }
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set(&mut self, i: usize, j: usize, rho: f64) -> Result<()> {
        if i >= self.dim || j >= self.dim {
            return Err(BoundError::DimensionMismatch {
                expected: self.dim,
                found: i.max(j) + 1,
            });
        }
        check_correlation("rho", rho)?;
        if i == j {
            if rho != 1.0 {
                return Err(BoundError::ParameterOutOfRange {
                    name: "correlation diagonal",
                    value: rho,
                    expected: "exactly 1",
                });
            }
            return Ok(());
        }
        self.pairs.insert((i.min(j), i.max(j)), rho);
        Ok(())
    }

    pub fn with(mut self, i: usize, j: usize, rho: f64) -> Result<Self> {
        self.set(i, j, rho)?;
        Ok(self)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        if i == j {
            return Some(1.0);
        }
        self.pairs.get(&(i.min(j), i.max(j))).copied()
    }
}

/// Options for [`assemble_q_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssembleOptions {
    /// Also require the correlation block of the risky assets to be PSD.
    pub check_correlation_psd: bool,
    pub tolerances: Tolerances,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self {
            check_correlation_psd: true,
            tolerances: Tolerances::default(),
        }
    }
}

/// Normalised cross-term `q = √((1−ν_m)(1−ν_n)) + ρ √(ν_m ν_n)`.
pub fn cross_term(m1: &AssetMoments, m2: &AssetMoments, rho: f64) -> Result<f64> {
    check_correlation("rho", rho)?;
    Ok(cross_term_unchecked(m1.root_variance, m2.root_variance, rho))
}

pub(crate) fn cross_term_unchecked(nu_m: f64, nu_n: f64, rho: f64) -> f64 {
    if nu_m == 0.0 || nu_n == 0.0 {
        return ((1.0 - nu_m) * (1.0 - nu_n)).sqrt();
    }
    ((1.0 - nu_m) * (1.0 - nu_n)).sqrt() + rho * (nu_m * nu_n).sqrt()
}

/// `Q_mn = √(f_m f_n) q_mn` with the default options.
pub fn assemble_q(moments: &[AssetMoments], correlations: &CorrelationMatrix) -> Result<MomentMatrix> {
    assemble_q_with(moments, correlations, &AssembleOptions::default())
}

pub fn assemble_q_with(
    moments: &[AssetMoments],
    correlations: &CorrelationMatrix,
    options: &AssembleOptions,
) -> Result<MomentMatrix> {
    let n = moments.len();
    if n == 0 {
        return Err(BoundError::InvalidMatrix("no assets".into()));
    }
    if correlations.dim() != n {
        return Err(BoundError::DimensionMismatch {
            expected: n,
            found: correlations.dim(),
        });
    }

    let risky: Vec<usize> = (0..n).filter(|&i| moments[i].root_variance > 0.0).collect();
    let mut rho = DMatrix::<f64>::identity(risky.len(), risky.len());
    for (a, &i) in risky.iter().enumerate() {
        for (b, &j) in risky.iter().enumerate().take(a) {
            let r = correlations
                .get(i, j)
                .ok_or(BoundError::MissingCorrelation(j, i))?;
            rho[(a, b)] = r;
            rho[(b, a)] = r;
        }
    }
    if options.check_correlation_psd && risky.len() > 1 {
        let min = symmetric_eigenvalues(&rho)?
            .last()
            .copied()
            .unwrap_or(1.0);
        if min < -options.tolerances.psd_tol {
            return Err(BoundError::CorrelationNotPositiveSemiDefinite { min_eigenvalue: min });
        }
    }

    let mut q = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        q[(i, i)] = moments[i].price;
        for j in 0..i {
            let r = correlations.get(i, j).unwrap_or(0.0);
            let c = cross_term_unchecked(moments[i].root_variance, moments[j].root_variance, r);
            let v = (moments[i].price * moments[j].price).sqrt() * c;
            q[(i, j)] = v;
            q[(j, i)] = v;
        }
    }
    MomentMatrix::new(q)
}

/// `ν = (E[a] − E[√a]²) / E[a]`.
pub fn root_variance_from_moments(e_a: f64, e_sqrt_a: f64, tol: &Tolerances) -> Result<f64> {
    check_positive("e_a", e_a)?;
    if !(e_sqrt_a >= 0.0 && e_sqrt_a.is_finite()) {
        return Err(BoundError::ParameterOutOfRange {
            name: "e_sqrt_a",
            value: e_sqrt_a,
            expected: ">= 0",
        });
    }
    let sq = e_sqrt_a * e_sqrt_a;
    if sq > e_a * (1.0 + tol.psd_tol) {
        return Err(BoundError::MomentInconsistency {
            mean: e_a,
            sqrt_moment_squared: sq,
        });
    }
    Ok((1.0 - sq / e_a).clamp(0.0, 1.0))
}

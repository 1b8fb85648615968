//! Refined vanilla bounds from a partition of unity on the asset.
//!
//! The spread `a − k` is split as `Σ_n (a·u_n(a) − k·u_n(a))` for partition
//! functions `u_n ≥ 0` with `Σ u_n = 1`. Each piece contributes two vectors
//! `√(a u_n)` and `√u_n` to the moment matrix, with quantities `1` and `−k`.
//!
//! Two families are provided: digital (piecewise-flat) cells and hat
//! (piecewise-linear) functions on a strike grid. Moments are taken from a
//! reference lognormal model, or supplied directly for the flat family.

use std::f64::consts::PI;

use log::warn;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::bound_engine::{positive_eigenvalue_bound, MomentMatrix, QuantityVector, Tolerances};
use crate::error::{check_positive, check_unit_interval, BoundError, Result};
use crate::reference_models::{adaptive_over_breakpoints, AdaptiveOptions, LognormalModel};
use crate::vanilla_bounds::check_increasing_positive;

/// Partition family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionKind {
    /// Digital cells between consecutive boundaries, with `0` and `∞` added.
    Flat,
    /// Hat functions centred on the strikes.
    Linear,
}

/// Partition family and its grid: interior boundaries for `Flat`, strikes for `Linear`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    kind: PartitionKind,
    points: Vec<f64>,
}

impl PartitionSpec {
    pub fn new(kind: PartitionKind, points: Vec<f64>) -> Result<Self> {
        check_increasing_positive(&points)?;
        if kind == PartitionKind::Linear && points.is_empty() {
            return Err(BoundError::InvalidPartition(
                "a linear partition needs at least one strike".into(),
            ));
        }
        Ok(Self { kind, points })
    }

    pub fn kind(&self) -> PartitionKind {
        self.kind
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of partition functions.
    pub fn len(&self) -> usize {
        match self.kind {
            PartitionKind::Flat => self.points.len() + 1,
            PartitionKind::Linear => self.points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The refined bound at strike `k` with moments from `model`.
    pub fn refined_bound(&self, model: &LognormalModel, k: f64, opts: &RefineOptions) -> Result<f64> {
        match self.kind {
            PartitionKind::Flat => {
                flat_refined_bound(&flat_conditional_moments(model, &self.points, opts)?, k, &opts.tolerances)
            }
            PartitionKind::Linear => {
                hat_refined_bound(&hat_moments(model, &self.points, opts)?, k, opts)
            }
        }
    }
}

/// Settings shared by the refinement routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    /// Cells whose digital price falls below this are dropped.
    pub cell_floor: f64,
    pub quadrature: AdaptiveOptions,
    pub tolerances: Tolerances,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            cell_floor: 1e-12,
            quadrature: AdaptiveOptions::default(),
            tolerances: Tolerances::default(),
        }
    }
}

/// Moments of the asset conditional on one digital cell `(lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellMoments {
    pub lower: f64,
    pub upper: f64,
    /// `d = E[1{a ∈ U}]`.
    pub digital: f64,
    /// `E[a | a ∈ U]`.
    pub price: f64,
    /// Root-variance of the asset conditional on the cell.
    pub root_variance: f64,
}

impl CellMoments {
    pub fn new(lower: f64, upper: f64, digital: f64, price: f64, root_variance: f64) -> Result<Self> {
        check_unit_interval("digital", digital)?;
        check_positive("conditional price", price)?;
        check_unit_interval("conditional root_variance", root_variance)?;
        Ok(Self {
            lower,
            upper,
            digital,
            price,
            root_variance,
        })
    }

    /// Builds a cell from unnormalised moments `E[1_U]`, `E[a 1_U]`, `E[√a 1_U]`.
    fn from_partial(lower: f64, upper: f64, d: f64, m1: f64, m_half: f64) -> Result<Self> {
        let price = m1 / d;
        let nu = (1.0 - m_half * m_half / (m1 * d)).clamp(0.0, 1.0);
        Self::new(lower, upper, d.min(1.0), price, nu)
    }

    /// `E[√a 1_U] = √(f(1−ν)) d`.
    pub fn sqrt_moment(&self) -> f64 {
        (self.price * (1.0 - self.root_variance)).sqrt() * self.digital
    }
}

/// Conditional moments for a flat partition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalMoments {
    pub cells: Vec<CellMoments>,
    /// Indices (in the original partition) of cells dropped for negligible mass.
    pub dropped: Vec<usize>,
}

impl ConditionalMoments {
    /// Externally supplied cell moments.
    pub fn from_cells(cells: Vec<CellMoments>) -> Result<Self> {
        if cells.is_empty() {
            return Err(BoundError::InvalidPartition("no cells".into()));
        }
        Ok(Self {
            cells,
            dropped: Vec::new(),
        })
    }

    /// `(Σ d_n, Σ f_n d_n, Σ √(f_n(1−ν_n)) d_n)`, which reproduce `(1, f, √(f(1−ν)))`.
    pub fn normalisation_sums(&self) -> (f64, f64, f64) {
        self.cells.iter().fold((0.0, 0.0, 0.0), |acc, c| {
            (acc.0 + c.digital, acc.1 + c.price * c.digital, acc.2 + c.sqrt_moment())
        })
    }
}

fn cell_edges(boundaries: &[f64]) -> Result<Vec<f64>> {
    check_increasing_positive(boundaries)?;
    let mut edges = Vec::with_capacity(boundaries.len() + 2);
    edges.push(0.0);
    edges.extend_from_slice(boundaries);
    edges.push(f64::INFINITY);
    Ok(edges)
}

fn collect_cells(
    edges: &[f64],
    floor: f64,
    mut partial: impl FnMut(f64, f64) -> Result<(f64, f64, f64)>,
) -> Result<ConditionalMoments> {
    let mut cells = Vec::new();
    let mut dropped = Vec::new();
    let mut largest = (0, 0.0);
    for (n, w) in edges.windows(2).enumerate() {
        let (d, m1, m_half) = partial(w[0], w[1])?;
        if d > largest.1 {
            largest = (n, d);
        }
        if d < floor || m1 <= 0.0 {
            warn!("dropping partition cell {n} ({}, {}) with mass {d:e}", w[0], w[1]);
            dropped.push(n);
            continue;
        }
        cells.push(CellMoments::from_partial(w[0], w[1], d, m1, m_half)?);
    }
    if cells.is_empty() {
        return Err(BoundError::DegenerateCell {
            cell: largest.0,
            mass: largest.1,
            floor,
        });
    }
    Ok(ConditionalMoments { cells, dropped })
}

/// Conditional moments of a lognormal model on the cells `(0, b₁], …, (b_{N−1}, ∞)`,
/// from closed-form partial moments.
pub fn flat_conditional_moments(
    model: &LognormalModel,
    boundaries: &[f64],
    opts: &RefineOptions,
) -> Result<ConditionalMoments> {
    let edges = cell_edges(boundaries)?;
    collect_cells(&edges, opts.cell_floor, |l, u| {
        Ok((
            model.partial_moment(0.0, l, u)?,
            model.partial_moment(1.0, l, u)?,
            model.partial_moment(0.5, l, u)?,
        ))
    })
}

/// As [`flat_conditional_moments`] but integrating the density numerically.
pub fn flat_conditional_moments_by_quadrature(
    model: &LognormalModel,
    boundaries: &[f64],
    opts: &RefineOptions,
) -> Result<ConditionalMoments> {
    let edges = cell_edges(boundaries)?;
    let q = &opts.quadrature;
    collect_cells(&edges, opts.cell_floor, |l, u| {
        Ok((
            model.expectation(|_| 1.0, l, u, q)?.value,
            model.expectation(|a| a, l, u, q)?.value,
            model.expectation(f64::sqrt, l, u, q)?.value,
        ))
    })
}

/// Bound from block-diagonal `Q` built from flat-partition moments.
pub fn flat_refined_bound(moments: &ConditionalMoments, k: f64, tol: &Tolerances) -> Result<f64> {
    check_positive("strike", k)?;
    let n = moments.cells.len();
    let mut q = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for (i, c) in moments.cells.iter().enumerate() {
        let cross = c.sqrt_moment();
        q[(i, i)] = c.price * c.digital;
        q[(n + i, n + i)] = c.digital;
        q[(i, n + i)] = cross;
        q[(n + i, i)] = cross;
    }
    let mut lambda = vec![1.0; n];
    lambda.extend(std::iter::repeat_n(-k, n));
    let r = positive_eigenvalue_bound(&MomentMatrix::new(q)?, &QuantityVector::new(lambda)?, tol)?;
    Ok(r.bound)
}

/// Piecewise-linear partition of unity on strikes `k₁ < … < k_N`.
///
/// `u₁ = 1` below `k₁`, `u_N = 1` above `k_N`, and between consecutive strikes
/// the two neighbouring hats interpolate linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPartition {
    strikes: Vec<f64>,
}

/// The hat-function family for a strike grid.
pub fn linear_partition_functions(strikes: &[f64]) -> Result<LinearPartition> {
    check_increasing_positive(strikes)?;
    if strikes.is_empty() {
        return Err(BoundError::InvalidPartition("no strikes".into()));
    }
    Ok(LinearPartition {
        strikes: strikes.to_vec(),
    })
}

impl LinearPartition {
    pub fn strikes(&self) -> &[f64] {
        &self.strikes
    }

    pub fn len(&self) -> usize {
        self.strikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strikes.is_empty()
    }

    /// `u_n(a)` for 0-based `n`.
    pub fn value(&self, n: usize, a: f64) -> f64 {
        let k = &self.strikes;
        let last = k.len() - 1;
        let ramp = |x: f64| x.max(0.0);
        let mut v = 1.0;
        if n > 0 {
            v -= (ramp(k[n] - a) - ramp(k[n - 1] - a)) / (k[n] - k[n - 1]);
        }
        if n < last {
            v -= (ramp(a - k[n]) - ramp(a - k[n + 1])) / (k[n + 1] - k[n]);
        }
        v
    }

    /// `√(u_n(a) u_{n+1}(a))`, non-zero only on `(k_n, k_{n+1})`.
    pub fn sqrt_product(&self, n: usize, a: f64) -> f64 {
        let k = &self.strikes;
        if n + 1 >= k.len() || a <= k[n] || a >= k[n + 1] {
            return 0.0;
        }
        ((a - k[n]) * (k[n + 1] - a)).sqrt() / (k[n + 1] - k[n])
    }
}

/// The six tridiagonal moment families for a hat partition.
///
/// Diagonal families have one entry per strike, off-diagonal families one per
/// adjacent pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HatMoments {
    pub strikes: Vec<f64>,
    /// `E[a u_n]`
    pub a_u: Vec<f64>,
    /// `E[√a u_n]`
    pub sqrt_a_u: Vec<f64>,
    /// `E[u_n]`
    pub u: Vec<f64>,
    /// `E[a √(u_n u_{n+1})]`
    pub a_uu: Vec<f64>,
    /// `E[√a √(u_n u_{n+1})]`
    pub sqrt_a_uu: Vec<f64>,
    /// `E[√(u_n u_{n+1})]`
    pub uu: Vec<f64>,
}

impl HatMoments {
    /// `(Σ E[u_n], Σ E[a u_n], Σ E[√a u_n])`, which reproduce `(1, E[a], E[√a])`.
    pub fn row_sums(&self) -> (f64, f64, f64) {
        (
            self.u.iter().sum(),
            self.a_u.iter().sum(),
            self.sqrt_a_u.iter().sum(),
        )
    }

    /// The `2N × 2N` moment matrix with blocks `[√(a u_m)·√(a u_n)]`,
    /// `[√(a u_m)·√u_n]` and `[√u_m·√u_n]`.
    pub fn moment_matrix(&self) -> DMatrix<f64> {
        let n = self.u.len();
        let mut q = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            q[(i, i)] = self.a_u[i];
            q[(n + i, n + i)] = self.u[i];
            q[(i, n + i)] = self.sqrt_a_u[i];
            q[(n + i, i)] = self.sqrt_a_u[i];
        }
        for i in 0..n.saturating_sub(1) {
            let j = i + 1;
            for (r, c, v) in [
                (i, j, self.a_uu[i]),
                (n + i, n + j, self.uu[i]),
                (i, n + j, self.sqrt_a_uu[i]),
                (j, n + i, self.sqrt_a_uu[i]),
            ] {
                q[(r, c)] = v;
                q[(c, r)] = v;
            }
        }
        q
    }
}

/// Hat-partition moments under a lognormal model, by quadrature.
///
/// Interior cells use `a = k_n + w(1 − cos θ)/2`, under which every integrand,
/// including the square-root products, is smooth in `θ`.
pub fn hat_moments(model: &LognormalModel, strikes: &[f64], opts: &RefineOptions) -> Result<HatMoments> {
    let partition = linear_partition_functions(strikes)?;
    let k = partition.strikes();
    let n = k.len();
    let q = &opts.quadrature;

    let mut m = HatMoments {
        strikes: k.to_vec(),
        a_u: vec![0.0; n],
        sqrt_a_u: vec![0.0; n],
        u: vec![0.0; n],
        a_uu: vec![0.0; n - 1],
        sqrt_a_uu: vec![0.0; n - 1],
        uu: vec![0.0; n - 1],
    };

    for (idx, l, u) in [(0, 0.0, k[0]), (n - 1, k[n - 1], f64::INFINITY)] {
        m.u[idx] += model.expectation(|_| 1.0, l, u, q)?.value;
        m.a_u[idx] += model.expectation(|a| a, l, u, q)?.value;
        m.sqrt_a_u[idx] += model.expectation(f64::sqrt, l, u, q)?.value;
    }

    for j in 0..n - 1 {
        let (lo, hi) = (k[j], k[j + 1]);
        let w = hi - lo;
        // cell integral of g(a, left hat, right hat, √(left·right)) against the density
        let cell = |g: &dyn Fn(f64, f64, f64, f64) -> f64| -> Result<f64> {
            let integrand = |theta: f64| {
                let (s, c) = theta.sin_cos();
                let a = lo + 0.5 * w * (1.0 - c);
                let left = 0.5 * (1.0 + c);
                let right = 0.5 * (1.0 - c);
                g(a, left, right, 0.5 * s) * model.density(a) * 0.5 * w * s
            };
            Ok(adaptive_over_breakpoints(integrand, &[0.0, PI], q)?.value)
        };
        m.u[j] += cell(&|_, l, _, _| l)?;
        m.u[j + 1] += cell(&|_, _, r, _| r)?;
        m.a_u[j] += cell(&|a, l, _, _| a * l)?;
        m.a_u[j + 1] += cell(&|a, _, r, _| a * r)?;
        m.sqrt_a_u[j] += cell(&|a, l, _, _| a.sqrt() * l)?;
        m.sqrt_a_u[j + 1] += cell(&|a, _, r, _| a.sqrt() * r)?;
        m.uu[j] = cell(&|_, _, _, p| p)?;
        m.a_uu[j] = cell(&|a, _, _, p| a * p)?;
        m.sqrt_a_uu[j] = cell(&|a, _, _, p| a.sqrt() * p)?;
    }
    Ok(m)
}

/// Bound from the tridiagonal-quadrant moment matrix of a hat partition.
///
/// Hats whose mass `E[u_n]` falls below the cell floor are removed together
/// with their paired vector.
pub fn hat_refined_bound(moments: &HatMoments, k: f64, opts: &RefineOptions) -> Result<f64> {
    check_positive("strike", k)?;
    let n = moments.u.len();
    let full = moments.moment_matrix();
    let keep: Vec<usize> = (0..n).filter(|&i| moments.u[i] >= opts.cell_floor).collect();
    if keep.is_empty() {
        return Err(BoundError::DegenerateCell {
            cell: 0,
            mass: moments.u.iter().copied().fold(0.0, f64::max),
            floor: opts.cell_floor,
        });
    }
    if keep.len() < n {
        warn!("dropping {} hat functions with negligible mass", n - keep.len());
    }
    let index: Vec<usize> = keep.iter().copied().chain(keep.iter().map(|&i| n + i)).collect();
    let q = DMatrix::from_fn(index.len(), index.len(), |r, c| full[(index[r], index[c])]);
    let mut lambda = vec![1.0; keep.len()];
    lambda.extend(std::iter::repeat_n(-k, keep.len()));
    let r = positive_eigenvalue_bound(
        &MomentMatrix::new(q)?,
        &QuantityVector::new(lambda)?,
        &opts.tolerances,
    )?;
    Ok(r.bound)
}

/// Hat-partition bound at strike `k` with moments implied by `model`.
pub fn linear_refined_bound(
    model: &LognormalModel,
    strikes: &[f64],
    k: f64,
    opts: &RefineOptions,
) -> Result<f64> {
    hat_refined_bound(&hat_moments(model, strikes, opts)?, k, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference_models::norm_cdf;
    use crate::vanilla_bounds::vanilla_bound;

    fn bs() -> LognormalModel {
        LognormalModel::new(1.0, 0.4, 1.0).unwrap()
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn single_cell_is_the_model() {
        let m = flat_conditional_moments(&bs(), &[], &RefineOptions::default()).unwrap();
        assert_eq!(m.cells.len(), 1);
        let c = m.cells[0];
        assert!((c.digital - 1.0).abs() < 1e-15);
        assert!((c.price - 1.0).abs() < 1e-15);
        assert!((c.root_variance - bs().root_variance()).abs() < 1e-15);
    }

    #[test]
    fn two_cells_split_at_forward() {
        let m = flat_conditional_moments(&bs(), &[1.0], &RefineOptions::default()).unwrap();
        let phi = norm_cdf(0.2);
        assert!((m.cells[0].digital - phi).abs() < 1e-15);
        assert!((m.cells[1].digital - (1.0 - phi)).abs() < 1e-15);
    }

    #[test]
    fn normalisation_identities() {
        let model = bs();
        let nu = model.root_variance();
        for b in [grid(0.5, 2.5, 5), grid(0.1, 2.9, 29)] {
            let m = flat_conditional_moments(&model, &b, &RefineOptions::default()).unwrap();
            let (d, f, s) = m.normalisation_sums();
            assert!((d - 1.0).abs() < 1e-10);
            assert!((f - 1.0).abs() < 1e-10);
            assert!((s - (1.0 - nu).sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn quadrature_moments_match_closed_form() {
        let model = bs();
        let opts = RefineOptions::default();
        for b in [grid(0.5, 2.5, 5), grid(0.1, 2.9, 29)] {
            let a = flat_conditional_moments(&model, &b, &opts).unwrap();
            let q = flat_conditional_moments_by_quadrature(&model, &b, &opts).unwrap();
            for (x, y) in a.cells.iter().zip(&q.cells) {
                assert!((x.digital - y.digital).abs() < 1e-9);
                assert!((x.price - y.price).abs() < 1e-9);
                assert!((x.root_variance - y.root_variance).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn flat_bound_is_sum_of_cell_bounds() {
        // Block-diagonal Q decouples into 2×2 problems, one per cell.
        let m = flat_conditional_moments(&bs(), &grid(0.5, 2.5, 5), &RefineOptions::default()).unwrap();
        for &k in &[0.45, 1.0, 1.3, 2.2] {
            let engine = flat_refined_bound(&m, k, &Tolerances::default()).unwrap();
            let oracle: f64 = m
                .cells
                .iter()
                .map(|c| c.digital * vanilla_bound(c.price, c.root_variance, k).unwrap())
                .sum();
            assert!((engine - oracle).abs() < 1e-13, "k={k} {engine} {oracle}");
        }
    }

    #[test]
    fn single_cell_reduces_to_vanilla() {
        let model = bs();
        let m = flat_conditional_moments(&model, &[], &RefineOptions::default()).unwrap();
        for &k in &[0.3, 1.0, 2.0] {
            let b = flat_refined_bound(&m, k, &Tolerances::default()).unwrap();
            let v = vanilla_bound(1.0, model.root_variance(), k).unwrap();
            assert!((b - v).abs() <= 1e-12 * v);
        }
    }

    #[test]
    fn far_tail_cells_are_dropped() {
        let m = flat_conditional_moments(&bs(), &[1.0, 50.0, 60.0], &RefineOptions::default()).unwrap();
        assert_eq!(m.dropped, vec![2, 3]);
        assert_eq!(m.cells.len(), 2);
    }

    #[test]
    fn all_cells_degenerate_is_an_error() {
        let opts = RefineOptions {
            cell_floor: 2.0,
            ..Default::default()
        };
        assert!(matches!(
            flat_conditional_moments(&bs(), &[1.0], &opts),
            Err(BoundError::DegenerateCell { .. })
        ));
    }

    #[test]
    fn hat_functions_partition_unity() {
        let p = linear_partition_functions(&grid(0.5, 2.5, 5)).unwrap();
        for i in 0..=300 {
            let a = i as f64 * 0.01;
            let vals: Vec<f64> = (0..5).map(|n| p.value(n, a)).collect();
            assert!(vals.iter().all(|v| (-1e-15..=1.0 + 1e-15).contains(v)));
            assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-14, "a={a}");
        }
        for (n, &k) in p.strikes().iter().enumerate() {
            for m in 0..5 {
                assert_eq!(p.value(m, k), if m == n { 1.0 } else { 0.0 });
            }
        }
        let mid = 0.75;
        assert!((p.value(0, mid) - 0.5).abs() < 1e-15);
        assert!((p.value(1, mid) - 0.5).abs() < 1e-15);
        assert!((p.sqrt_product(0, mid) - 0.5).abs() < 1e-15);
        assert!(((p.value(0, 0.6) * p.value(1, 0.6)).sqrt() - p.sqrt_product(0, 0.6)).abs() < 1e-15);
    }

    #[test]
    fn hat_diagonal_families_match_partial_moments() {
        let model = bs();
        let strikes = grid(0.5, 2.5, 5);
        let m = hat_moments(&model, &strikes, &RefineOptions::default()).unwrap();
        // E[a^p u_n] from closed-form partial moments of a^p and a^(p+1).
        let pm = |p: f64, l: f64, u: f64| model.partial_moment(p, l, u).unwrap();
        for (n, &kn) in strikes.iter().enumerate() {
            for (p, fam) in [(0.0, &m.u), (0.5, &m.sqrt_a_u), (1.0, &m.a_u)] {
                let mut want = 0.0;
                if n == 0 {
                    want += pm(p, 0.0, kn);
                } else {
                    let kl = strikes[n - 1];
                    want += (pm(p + 1.0, kl, kn) - kl * pm(p, kl, kn)) / (kn - kl);
                }
                if n == strikes.len() - 1 {
                    want += pm(p, kn, f64::INFINITY);
                } else {
                    let kr = strikes[n + 1];
                    want += (kr * pm(p, kn, kr) - pm(p + 1.0, kn, kr)) / (kr - kn);
                }
                assert!((fam[n] - want).abs() < 1e-12, "n={n} p={p} {} {want}", fam[n]);
            }
        }
        let (u, a, s) = m.row_sums();
        assert!((u - 1.0).abs() < 1e-12);
        assert!((a - 1.0).abs() < 1e-12);
        assert!((s - (-0.02_f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn hat_off_diagonal_by_brute_force() {
        // Midpoint rule with many points on the product √(u_n u_{n+1}).
        let model = bs();
        let strikes = [0.8, 1.1, 1.6];
        let p = linear_partition_functions(&strikes).unwrap();
        let m = hat_moments(&model, &strikes, &RefineOptions::default()).unwrap();
        for n in 0..2 {
            let (lo, hi) = (strikes[n], strikes[n + 1]);
            let steps = 400_000;
            let h = (hi - lo) / steps as f64;
            let mut s = 0.0;
            for i in 0..steps {
                let a = lo + (i as f64 + 0.5) * h;
                s += a.sqrt() * p.sqrt_product(n, a) * model.density(a) * h;
            }
            assert!((m.sqrt_a_uu[n] - s).abs() < 1e-9, "n={n} {} {s}", m.sqrt_a_uu[n]);
        }
    }

    #[test]
    fn single_hat_reduces_to_vanilla() {
        let model = bs();
        let opts = RefineOptions::default();
        for &k in &[0.5, 1.0, 1.7] {
            let b = linear_refined_bound(&model, &[1.0], k, &opts).unwrap();
            let v = vanilla_bound(1.0, model.root_variance(), k).unwrap();
            assert!((b - v).abs() <= 1e-12 * v, "k={k} {b} {v}");
        }
    }

    #[test]
    fn spec_validation() {
        assert!(PartitionSpec::new(PartitionKind::Flat, vec![1.0, 0.5]).is_err());
        assert!(PartitionSpec::new(PartitionKind::Linear, vec![]).is_err());
        assert!(PartitionSpec::new(PartitionKind::Flat, vec![]).is_ok());
        let s = PartitionSpec::new(PartitionKind::Linear, grid(0.5, 2.5, 5)).unwrap();
        assert_eq!(s.len(), 5);
    }
}

//! FX cross-rate bounds and forward-starting caplets bounded by swap-rate moments.

use serde::Serialize;

use crate::bound_engine::{
    positive_eigenvalue_bound, BoundResult, MomentMatrix, QuantityVector, Tolerances,
};
use crate::error::{check_correlation, check_positive, check_range, check_unit_interval, BoundError, Result};
use crate::moment_model::cross_term_unchecked;
use crate::reference_models::{AdaptiveOptions, LognormalModel};
use crate::vanilla_bounds::vanilla_bound;

/// Root-variance of the cross rate `x₁/x₂` from the two liquid legs.
///
/// Equal to `1 − q²` with `q = √((1−ν₁)(1−ν₂)) + ρ√(ν₁ν₂)`, evaluated without
/// the cancellation in `1 − q²` so that the degenerate cases are exact.
pub fn cross_root_variance(nu1: f64, nu2: f64, rho: f64) -> Result<f64> {
    check_unit_interval("nu1", nu1)?;
    check_unit_interval("nu2", nu2)?;
    check_correlation("rho", rho)?;
    let c = ((1.0 - nu1) * (1.0 - nu2)).sqrt();
    let s = (nu1 * nu2).sqrt();
    let aligned = nu2 * (1.0 - nu1) + nu1 * (1.0 - nu2) - 2.0 * c * s;
    let decorrelated = (1.0 - rho) * s * (2.0 * c + (1.0 + rho) * s);
    Ok((aligned.max(0.0) + decorrelated).clamp(0.0, 1.0))
}

/// Moments of the two FX legs and the forward of the cross.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FxLegMoments {
    pub nu1: f64,
    pub nu2: f64,
    pub rho: f64,
    /// Cross forward under the base-currency measure.
    pub forward: f64,
}

impl FxLegMoments {
    pub fn new(nu1: f64, nu2: f64, rho: f64, forward: f64) -> Result<Self> {
        cross_root_variance(nu1, nu2, rho)?;
        check_positive("forward", forward)?;
        Ok(Self {
            nu1,
            nu2,
            rho,
            forward,
        })
    }

    pub fn cross_root_variance(&self) -> f64 {
        cross_root_variance(self.nu1, self.nu2, self.rho).unwrap_or(f64::NAN)
    }

    /// Vanilla bound on the cross at strike `k`.
    pub fn bound(&self, k: f64) -> Result<f64> {
        vanilla_bound(self.forward, cross_root_variance(self.nu1, self.nu2, self.rho)?, k)
    }
}

/// Vanilla bound on the FX cross.
pub fn fx_cross_bound(legs: &FxLegMoments, k: f64) -> Result<f64> {
    legs.bound(k)
}

/// Discount factors, accrual fractions and swap-rate moments for periods `1..=N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwapCurveSlice {
    discount: Vec<f64>,
    daycount: Vec<f64>,
    forwards: Vec<f64>,
    root_variances: Vec<f64>,
    /// `correlations[i]` links swap rates `i+1` and `i+2` (1-based).
    correlations: Vec<f64>,
    shift: f64,
}

impl SwapCurveSlice {
    pub fn new(
        discount: Vec<f64>,
        daycount: Vec<f64>,
        forwards: Vec<f64>,
        root_variances: Vec<f64>,
        correlations: Vec<f64>,
        shift: f64,
    ) -> Result<Self> {
        let n = discount.len();
        if n == 0 {
            return Err(BoundError::ShapeViolation("empty swap curve".into()));
        }
        for (name, len, want) in [
            ("daycount", daycount.len(), n),
            ("forwards", forwards.len(), n),
            ("root_variances", root_variances.len(), n),
            ("correlations", correlations.len(), n - 1),
        ] {
            if len != want {
                return Err(BoundError::ShapeViolation(format!(
                    "{name} has {len} entries, expected {want}"
                )));
            }
        }
        for &p in &discount {
            check_positive("discount factor", p)?;
        }
        for &d in &daycount {
            check_positive("daycount fraction", d)?;
        }
        for &f in &forwards {
            check_range("swap forward", f, f.is_finite(), "finite")?;
        }
        for &nu in &root_variances {
            check_unit_interval("root_variance", nu)?;
        }
        for &rho in &correlations {
            check_correlation("rho", rho)?;
        }
        check_unit_interval("shift", shift)?;
        Ok(Self {
            discount,
            daycount,
            forwards,
            root_variances,
            correlations,
            shift,
        })
    }

    /// Flat curve: constant per-period rate `r` compounded over periods of
    /// length `delta`, constant swap forwards, root-variances and correlations.
    pub fn flat(
        periods: usize,
        discount_rate: f64,
        delta: f64,
        forward: f64,
        nu: f64,
        rho: f64,
        shift: f64,
    ) -> Result<Self> {
        let discount = (1..=periods)
            .map(|m| (1.0 + discount_rate * delta).powi(-(m as i32)))
            .collect();
        Self::new(
            discount,
            vec![delta; periods],
            vec![forward; periods],
            vec![nu; periods],
            vec![rho; periods.saturating_sub(1)],
            shift,
        )
    }

    /// Flat curve whose unshifted swap rates follow a Black model with volatility
    /// `vol` to `expiry`. The root-variance of each rate is that of the rate
    /// after its shift `α/δ̄_n`, so it shrinks as the shift grows.
    #[allow(clippy::too_many_arguments)]
    pub fn flat_lognormal(
        periods: usize,
        discount_rate: f64,
        delta: f64,
        forward: f64,
        vol: f64,
        expiry: f64,
        rho: f64,
        shift: f64,
    ) -> Result<Self> {
        let base = Self::flat(periods, discount_rate, delta, forward, 0.0, rho, shift)?;
        let model = LognormalModel::new(forward, vol, expiry)?;
        let opts = AdaptiveOptions::default();
        let nus = (1..=periods)
            .map(|n| {
                let c = shift / annuity_weights(&base, n)?.mean_daycount;
                shifted_root_variance(&model, c, &opts)
            })
            .collect::<Result<Vec<_>>>()?;
        base.with_root_variances(nus)
    }

    pub fn len(&self) -> usize {
        self.discount.len()
    }

    pub fn is_empty(&self) -> bool {
        self.discount.is_empty()
    }

    pub fn discount(&self) -> &[f64] {
        &self.discount
    }

    pub fn daycount(&self) -> &[f64] {
        &self.daycount
    }

    pub fn forwards(&self) -> &[f64] {
        &self.forwards
    }

    pub fn root_variances(&self) -> &[f64] {
        &self.root_variances
    }

    pub fn correlations(&self) -> &[f64] {
        &self.correlations
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Same curve with a different shift fraction. Root-variances are kept.
    pub fn with_shift(&self, shift: f64) -> Result<Self> {
        check_unit_interval("shift", shift)?;
        Ok(Self {
            shift,
            ..self.clone()
        })
    }

    /// Same curve with a different correlation between every adjacent pair.
    pub fn with_correlation(&self, rho: f64) -> Result<Self> {
        check_correlation("rho", rho)?;
        Ok(Self {
            correlations: vec![rho; self.correlations.len()],
            ..self.clone()
        })
    }

    /// Same curve with replaced root-variances.
    pub fn with_root_variances(&self, root_variances: Vec<f64>) -> Result<Self> {
        Self::new(
            self.discount.clone(),
            self.daycount.clone(),
            self.forwards.clone(),
            root_variances,
            self.correlations.clone(),
            self.shift,
        )
    }

    fn check_period(&self, n: usize) -> Result<()> {
        check_range(
            "period",
            n as f64,
            (2..=self.len()).contains(&n),
            "2 <= n <= curve length",
        )
    }
}

/// Annuity weights of swap `n` and the inversion weight for forward `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnuityWeights {
    /// `w_m = p_m δ_m / Σ_{l≤n} p_l δ_l`, for `m = 1..=n`.
    pub weights: Vec<f64>,
    /// `λ_n = Σ_{m<n} p_m δ_m / (p_n δ_n)`.
    pub lambda: f64,
    /// `δ̄_n = Σ_{m≤n} p_m δ_m / Σ_{m≤n} p_m`.
    pub mean_daycount: f64,
}

/// Weights linking swap rate `n` (1-based) to its forward rates.
pub fn annuity_weights(slice: &SwapCurveSlice, n: usize) -> Result<AnnuityWeights> {
    check_range("period", n as f64, (1..=slice.len()).contains(&n), "1 <= n <= curve length")?;
    let pd: Vec<f64> = (0..n).map(|m| slice.discount[m] * slice.daycount[m]).collect();
    let annuity: f64 = pd.iter().sum();
    let previous: f64 = pd[..n - 1].iter().sum();
    let discount_sum: f64 = slice.discount[..n].iter().sum();
    Ok(AnnuityWeights {
        weights: pd.iter().map(|x| x / annuity).collect(),
        lambda: previous / pd[n - 1],
        mean_daycount: annuity / discount_sum,
    })
}

/// `r_n = (λ_n + 1) s_n − λ_n s_{n−1}`.
pub fn forward_from_swaps(lambda: f64, s_n: f64, s_prev: f64) -> f64 {
    (lambda + 1.0) * s_n - lambda * s_prev
}

/// The 3×3 caplet problem after shifting, before the engine call.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapletProblem {
    pub period: usize,
    pub lambda: f64,
    /// Shifted swap forwards `(f_n, f_{n−1})`.
    pub shifted_forwards: (f64, f64),
    pub root_variances: (f64, f64),
    pub rho: f64,
    pub shifted_strike: f64,
}

impl CapletProblem {
    pub fn new(slice: &SwapCurveSlice, n: usize, k: f64) -> Result<Self> {
        slice.check_period(n)?;
        check_range("strike", k, k.is_finite(), "finite")?;
        let alpha = slice.shift;
        let current = annuity_weights(slice, n)?;
        let previous = annuity_weights(slice, n - 1)?;
        let f_n = slice.forwards[n - 1] + alpha / current.mean_daycount;
        let f_prev = slice.forwards[n - 2] + alpha / previous.mean_daycount;
        for (what, value) in [("swap rate n", f_n), ("swap rate n-1", f_prev)] {
            if value <= 0.0 {
                return Err(BoundError::NegativeShiftedRate { what, value });
            }
        }
        Ok(Self {
            period: n,
            lambda: current.lambda,
            shifted_forwards: (f_n, f_prev),
            root_variances: (slice.root_variances[n - 1], slice.root_variances[n - 2]),
            rho: slice.correlations[n - 2],
            shifted_strike: k + alpha / slice.daycount[n - 1],
        })
    }

    /// The moment matrix over `(s_n, s_{n−1}, 1)`.
    pub fn moment_matrix(&self) -> Result<MomentMatrix> {
        let (f_n, f_p) = self.shifted_forwards;
        let (nu_n, nu_p) = self.root_variances;
        let cross = (f_n * f_p).sqrt() * cross_term_unchecked(nu_n, nu_p, self.rho);
        let a = (f_n * (1.0 - nu_n)).sqrt();
        let b = (f_p * (1.0 - nu_p)).sqrt();
        MomentMatrix::from_rows(&[vec![f_n, cross, a], vec![cross, f_p, b], vec![a, b, 1.0]])
    }

    /// `diag(λ_n + 1, −λ_n, −k̃_n)`. A zero shifted strike is kept as is.
    pub fn quantities(&self) -> Result<QuantityVector> {
        QuantityVector::new(vec![self.lambda + 1.0, -self.lambda, -self.shifted_strike])
    }

    pub fn bound_result(&self, tol: &Tolerances) -> Result<BoundResult> {
        positive_eigenvalue_bound(&self.moment_matrix()?, &self.quantities()?, tol)
    }
}

/// Undiscounted bound on `E[(r_n − k)⁺]` for the forward rate of period `n` (1-based).
///
/// The shifted strike may be zero or negative; the bound then still follows from
/// the engine, with two positive eigenvalues once the shifted strike is negative.
pub fn caplet_bound(slice: &SwapCurveSlice, n: usize, k: f64, tol: &Tolerances) -> Result<f64> {
    Ok(CapletProblem::new(slice, n, k)?.bound_result(tol)?.bound)
}

/// Bounds, positive-eigenvalue counts and implied CDF over a strike grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapletCdfScan {
    pub strikes: Vec<f64>,
    pub bounds: Vec<f64>,
    pub positive_counts: Vec<usize>,
    /// `1 + ∂bound/∂k` by central differences.
    pub cdf: Vec<f64>,
    /// Grid strikes at which the count first drops from two to one.
    pub switch_strikes: Vec<f64>,
    /// Strike at which the shifted strike vanishes, `−α/δ_n`.
    pub switch_location: f64,
    /// Discrete probability at the switch, `CDF(k⁺) − CDF(k⁻)`.
    pub switch_mass: f64,
    /// Discrete probability at strike zero.
    pub mass_at_zero: f64,
    pub step: f64,
}

/// Options for [`caplet_cdf_scan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfScanOptions {
    /// Difference step in strike units.
    pub step: f64,
    pub tolerances: Tolerances,
}

impl Default for CdfScanOptions {
    fn default() -> Self {
        Self {
            step: 1e-6,
            tolerances: Tolerances::default(),
        }
    }
}

/// Scans the caplet bound over strikes and locates the eigenvalue-regime switch.
pub fn caplet_cdf_scan(
    slice: &SwapCurveSlice,
    n: usize,
    strikes: &[f64],
    opts: &CdfScanOptions,
) -> Result<CapletCdfScan> {
    if strikes.windows(2).any(|w| w[1] <= w[0]) || strikes.is_empty() {
        return Err(BoundError::ShapeViolation("strikes must be strictly increasing".into()));
    }
    check_positive("step", opts.step)?;
    let tol = &opts.tolerances;
    let h = opts.step;
    let bound = |k: f64| caplet_bound(slice, n, k, tol);

    let mut bounds = Vec::with_capacity(strikes.len());
    let mut counts = Vec::with_capacity(strikes.len());
    let mut cdf = Vec::with_capacity(strikes.len());
    for &k in strikes {
        let r = CapletProblem::new(slice, n, k)?.bound_result(tol)?;
        bounds.push(r.bound);
        counts.push(r.positive_count);
        cdf.push(1.0 + (bound(k + h)? - bound(k - h)?) / (2.0 * h));
    }
    let switch_strikes = strikes
        .windows(2)
        .zip(counts.windows(2))
        .filter(|(_, c)| c[0] == 2 && c[1] == 1)
        .map(|(k, _)| k[1])
        .collect();

    let k0 = -slice.shift / slice.daycount[n - 1];
    let switch_mass = caplet_point_mass(slice, n, k0, h, tol)?;
    let mass_at_zero = caplet_point_mass(slice, n, 0.0, h, tol)?;

    Ok(CapletCdfScan {
        strikes: strikes.to_vec(),
        bounds,
        positive_counts: counts,
        cdf,
        switch_strikes,
        switch_location: k0,
        switch_mass,
        mass_at_zero,
        step: h,
    })
}

/// Jump `CDF(k⁺) − CDF(k⁻)` of the implied CDF at strike `k`, from
/// second-order one-sided differences with step `h`.
pub fn caplet_point_mass(slice: &SwapCurveSlice, n: usize, k: f64, h: f64, tol: &Tolerances) -> Result<f64> {
    check_positive("step", h)?;
    let b = |x: f64| caplet_bound(slice, n, x, tol);
    let b0 = b(k)?;
    let right = (-3.0 * b0 + 4.0 * b(k + h)? - b(k + 2.0 * h)?) / (2.0 * h);
    let left = (3.0 * b0 - 4.0 * b(k - h)? + b(k - 2.0 * h)?) / (2.0 * h);
    Ok(right - left)
}

/// Root-variance of the shifted rate `s + c` when `s` follows `model`.
pub fn shifted_root_variance(model: &LognormalModel, shift: f64, opts: &AdaptiveOptions) -> Result<f64> {
    check_range("shift", shift, shift >= 0.0 && shift.is_finite(), ">= 0")?;
    if shift == 0.0 {
        return Ok(model.root_variance());
    }
    let mean = model.forward() + shift;
    let root = model
        .expectation(|s| (s + shift).sqrt(), 0.0, f64::INFINITY, opts)?
        .value;
    Ok((1.0 - root * root / mean).clamp(0.0, 1.0))
}

//! Local attainment of the vanilla bound by strike-dependent binomial models,
//! and global non-attainment via the moments implied by the bound curve.
//!
//! With `ν = cos²θ`, the binomial model with weights `sin²χ`, `cos²χ` on the
//! states `a_−`, `a_+` is calibrated to the price `f` and the root-variance `ν`.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{check_positive, check_range, check_unit_interval, BoundError, Result};
use crate::reference_models::{adaptive_over_breakpoints, AdaptiveOptions, BinomialModel};
use crate::vanilla_bounds::vanilla_bound;

fn check_interior_nu(nu: f64) -> Result<()> {
    check_range("root_variance", nu, nu > 0.0 && nu < 1.0, "0 < nu < 1")
}

/// `θ = arccos √ν`.
pub fn root_variance_angle(nu: f64) -> Result<f64> {
    check_unit_interval("root_variance", nu)?;
    Ok(nu.sqrt().acos())
}

/// Binomial model with `a_− ≤ a_+`, valid for `π/2 − θ ≤ χ < π/2`.
pub fn binomial_calibrate(f: f64, nu: f64, chi: f64) -> Result<BinomialModel> {
    check_positive("forward", f)?;
    check_interior_nu(nu)?;
    let theta = root_variance_angle(nu)?;
    let lower = FRAC_PI_2 - theta;
    if !(chi >= lower && chi < FRAC_PI_2) {
        return Err(BoundError::AngleOutOfRange {
            chi,
            lower,
            upper: FRAC_PI_2,
        });
    }
    let (s, c) = chi.sin_cos();
    let (sb, cb) = (theta + chi).sin_cos();
    BinomialModel::new(f * cb * cb / (s * s), f * sb * sb / (c * c), chi)
}

/// Binomial model with `a_− ≥ a_+`, valid for `0 < χ ≤ θ`.
pub fn binomial_calibrate_first(f: f64, nu: f64, chi: f64) -> Result<BinomialModel> {
    check_positive("forward", f)?;
    check_interior_nu(nu)?;
    let theta = root_variance_angle(nu)?;
    if !(chi > 0.0 && chi <= theta) {
        return Err(BoundError::AngleOutOfRange {
            chi,
            lower: 0.0,
            upper: theta,
        });
    }
    let (s, c) = chi.sin_cos();
    let (sb, cb) = (theta - chi).sin_cos();
    BinomialModel::new(f * cb * cb / (s * s), f * sb * sb / (c * c), chi)
}

/// Call price `E[(a − k)⁺]` in a binomial model.
pub fn binomial_call(model: &BinomialModel, k: f64) -> f64 {
    model.price(|a| (a - k).max(0.0))
}

/// Points in the coarse scan that confirms the optimal angle.
const ANGLE_SCAN_POINTS: usize = 2000;

/// Angle of the second-branch binomial model with the highest call price at `k`.
///
/// Solves `tan 2χ = −f sin 2θ / (f cos 2θ + k)` on the branch
/// `2χ = π − arg(f e^{2iθ} + k)`, which lies in `(π/2 − θ, π/2)`, and checks
/// that no angle of a uniform scan over the branch prices higher.
pub fn optimal_angle(f: f64, nu: f64, k: f64) -> Result<f64> {
    check_positive("forward", f)?;
    check_positive("strike", k)?;
    check_interior_nu(nu)?;
    let theta = root_variance_angle(nu)?;
    let (s2, c2) = (2.0 * theta).sin_cos();
    let chi = 0.5 * (f * s2).atan2(-(f * c2 + k));

    let formula = binomial_call(&binomial_calibrate(f, nu, chi)?, k);
    let lower = FRAC_PI_2 - theta;
    let mut scan: f64 = 0.0;
    for i in 0..ANGLE_SCAN_POINTS {
        let x = lower + (FRAC_PI_2 - lower) * i as f64 / ANGLE_SCAN_POINTS as f64;
        scan = scan.max(binomial_call(&binomial_calibrate(f, nu, x)?, k));
    }
    if scan > formula * (1.0 + 1e-9) + 1e-15 {
        return Err(BoundError::BranchResolutionFailure { formula, scan });
    }
    Ok(chi)
}

/// Optimal binomial model at strike `k`.
pub fn optimal_binomial(f: f64, nu: f64, k: f64) -> Result<BinomialModel> {
    binomial_calibrate(f, nu, optimal_angle(f, nu, k)?)
}

/// Bound at `k_to` minus the price there of the model that is optimal at `k_from`.
pub fn cross_strike_miss(f: f64, nu: f64, k_from: f64, k_to: f64) -> Result<f64> {
    let model = optimal_binomial(f, nu, k_from)?;
    Ok(vanilla_bound(f, nu, k_to)? - binomial_call(&model, k_to))
}

/// One strike of a local attainment scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttainmentPoint {
    pub strike: f64,
    pub chi: f64,
    pub a_minus: f64,
    pub a_plus: f64,
    pub binomial_price: f64,
    pub bound: f64,
    /// `|binomial price − bound| / bound`.
    pub gap: f64,
}

/// Moments implied by the bound curve for one root-variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpliedMoment {
    /// Constraint root-variance.
    pub nu: f64,
    /// `E[√a]/√f` implied by the bound curve.
    pub sqrt_moment: f64,
    /// `1 − (E[√a]/√f)²`.
    pub implied_nu: f64,
}

/// Results of the local and global attainment checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttainmentReport {
    pub forward: f64,
    pub nu: f64,
    pub points: Vec<AttainmentPoint>,
    pub max_gap: f64,
    /// Relative tolerance the gaps were checked against.
    pub attain_tol: f64,
    /// Bound minus the price at the last strike of the model optimal at the
    /// first strike.
    pub cross_strike_miss: Option<f64>,
    pub global: ImpliedMoment,
}

impl AttainmentReport {
    /// Every strike attained, and no single model attains the two end strikes.
    pub fn attained_locally_only(&self) -> bool {
        self.max_gap <= self.attain_tol
            && self
                .cross_strike_miss
                .is_none_or(|m| m > self.attain_tol * self.points.last().map_or(1.0, |p| p.bound))
    }
}

/// Optimal binomial model and gap to the bound at each strike.
pub fn local_attainment_scan(f: f64, nu: f64, strikes: &[f64], attain_tol: f64) -> Result<AttainmentReport> {
    check_interior_nu(nu)?;
    check_positive("attain_tol", attain_tol)?;
    let mut points = Vec::with_capacity(strikes.len());
    for &k in strikes {
        let chi = optimal_angle(f, nu, k)?;
        let model = binomial_calibrate(f, nu, chi)?;
        let price = binomial_call(&model, k);
        let bound = vanilla_bound(f, nu, k)?;
        points.push(AttainmentPoint {
            strike: k,
            chi,
            a_minus: model.a_minus,
            a_plus: model.a_plus,
            binomial_price: price,
            bound,
            gap: (price - bound).abs() / bound,
        });
    }
    let max_gap = points.iter().map(|p| p.gap).fold(0.0, f64::max);
    let cross = match (strikes.first(), strikes.last()) {
        (Some(&a), Some(&b)) if b > a => Some(cross_strike_miss(f, nu, a, b)?),
        _ => None,
    };
    Ok(AttainmentReport {
        forward: f,
        nu,
        points,
        max_gap,
        attain_tol,
        cross_strike_miss: cross,
        global: implied_moment(nu)?,
    })
}

/// `(1/x²)(√((1−x²)² + 4x²ν) − (1 − x²))` in a form without cancellation;
/// its value at `x = 0` is `2ν`.
fn carr_madan_kernel(x: f64, nu: f64) -> f64 {
    let u = 1.0 - x * x;
    let d = (u * u + 4.0 * x * x * nu).sqrt() + u;
    if d == 0.0 {
        2.0
    } else {
        4.0 * nu / d
    }
}

/// Required accuracy of the moment integrals.
const MOMENT_ERROR_TARGET: f64 = 1e-10;

fn moment_quadrature() -> AdaptiveOptions {
    AdaptiveOptions {
        nodes: 64,
        abs_tol: 1e-14,
        rel_tol: 1e-14,
        max_panels: 4096,
    }
}

fn checked(integral: crate::reference_models::Integral) -> Result<f64> {
    if integral.error_estimate > MOMENT_ERROR_TARGET {
        return Err(BoundError::QuadratureBudgetExceeded {
            tolerance: MOMENT_ERROR_TARGET,
            panels: integral.panels,
            estimate: integral.error_estimate,
        });
    }
    Ok(integral.value)
}

/// Breakpoint where the kernel's curvature concentrates.
fn kernel_breaks(nu: f64) -> Vec<f64> {
    if nu > 0.0 && nu < 0.5 {
        vec![0.0, (1.0 - 2.0 * nu).sqrt(), 1.0]
    } else {
        vec![0.0, 1.0]
    }
}

/// `E[√a]/√f` for the measure whose call and put prices are the bound curves.
pub fn carr_madan_sqrt_moment(nu: f64) -> Result<f64> {
    check_unit_interval("root_variance", nu)?;
    if nu == 0.0 {
        return Ok(1.0);
    }
    let integral = adaptive_over_breakpoints(|x| carr_madan_kernel(x, nu), &kernel_breaks(nu), &moment_quadrature())?;
    Ok(1.0 - 0.5 * checked(integral)?)
}

/// `E[aⁿ]/fⁿ` for `0 < n < 1` under the measure implied by the bound curves.
///
/// The substitution `x = t^{1/(2m)}`, `m = min(n, 1 − n)`, removes the
/// endpoint singularity of `x^{−|2n−1|}`.
pub fn general_moment(nu: f64, n: f64) -> Result<f64> {
    check_unit_interval("root_variance", nu)?;
    check_range("moment order", n, n > 0.0 && n < 1.0, "0 < n < 1")?;
    if nu == 0.0 {
        return Ok(1.0);
    }
    let m = n.min(1.0 - n);
    let p = 1.0 / (2.0 * m);
    // integrand in t: h(x) (x^{1−2m} + x^{−(1−2m)}) dx/dt with dx/dt = p t^{p−1}
    let integrand = |t: f64| {
        if t <= 0.0 {
            return if m == 0.5 { 2.0 * carr_madan_kernel(0.0, nu) } else { p * carr_madan_kernel(0.0, nu) };
        }
        let x = t.powf(p);
        let singular = p; // x^{−(1−2m)} t^{p−1} = 1
        let regular = p * t.powf(1.0 / m - 2.0);
        carr_madan_kernel(x, nu) * (singular + regular)
    };
    let breaks: Vec<f64> = kernel_breaks(nu).iter().map(|&x: &f64| x.powf(2.0 * m)).collect();
    let integral = adaptive_over_breakpoints(integrand, &breaks, &moment_quadrature())?;
    Ok(1.0 + n * (n - 1.0) * checked(integral)?)
}

/// Implied square-root moment and root-variance at one constraint value.
pub fn implied_moment(nu: f64) -> Result<ImpliedMoment> {
    let v = carr_madan_sqrt_moment(nu)?;
    Ok(ImpliedMoment {
        nu,
        sqrt_moment: v,
        implied_nu: (1.0 - v * v).clamp(0.0, 1.0),
    })
}

/// [`implied_moment`] over a grid of constraint root-variances.
pub fn implied_root_variance_curve(nus: &[f64]) -> Result<Vec<ImpliedMoment>> {
    nus.iter().map(|&nu| implied_moment(nu)).collect()
}

//! Two-asset bound for vanilla options, its implied smile and implied CDF.
//!
//! For an asset with price `f` and root-variance `ν`, the call with strike `k`
//! is bounded by the positive root of `p² − (f−k)p − fkν = 0`:
//!
//! ```text
//! E[(a − k)⁺] ≤ ½(f − k) + ½√((f − k)² + 4fkν)
//! ```

use nalgebra::DMatrix;
use serde::Serialize;

use crate::bound_engine::{positive_eigenvalue_bound, MomentMatrix, QuantityVector, Tolerances};
use crate::error::{check_positive, check_range, check_unit_interval, BoundError, Result};
use crate::reference_models::implied_lognormal_vol;

/// Upper bound for `E[(a − k)⁺]` given `f = E[a]` and root-variance `ν`.
pub fn vanilla_bound(f: f64, nu: f64, k: f64) -> Result<f64> {
    check_positive("forward", f)?;
    check_unit_interval("root_variance", nu)?;
    check_range("strike", k, k >= 0.0 && k.is_finite(), ">= 0")?;
    Ok(positive_root(f - k, f * k * nu))
}

/// Positive root of `p² − b p − c = 0` for `c ≥ 0`, free of cancellation.
fn positive_root(b: f64, c: f64) -> f64 {
    let disc = b.hypot(2.0 * c.sqrt());
    if b >= 0.0 {
        0.5 * (b + disc)
    } else if c == 0.0 {
        0.0
    } else {
        2.0 * c / (disc - b)
    }
}

/// Upper bound for the put `E[(k − a)⁺]`; the call bound with `f` and `k` exchanged.
pub fn vanilla_put_bound(f: f64, nu: f64, k: f64) -> Result<f64> {
    check_positive("forward", f)?;
    check_unit_interval("root_variance", nu)?;
    check_range("strike", k, k >= 0.0 && k.is_finite(), ">= 0")?;
    Ok(positive_root(k - f, f * k * nu))
}

/// The 2×2 moment matrix `[[f, √(f(1−ν))], [√(f(1−ν)), 1]]`.
pub fn vanilla_moment_matrix(f: f64, nu: f64) -> Result<MomentMatrix> {
    check_positive("forward", f)?;
    check_unit_interval("root_variance", nu)?;
    let c = (f * (1.0 - nu)).sqrt();
    MomentMatrix::new(DMatrix::from_row_slice(2, 2, &[f, c, c, 1.0]))
}

/// Same bound evaluated through the eigenvalue engine with `Λ = diag(1, −k)`.
pub fn vanilla_bound_via_engine(f: f64, nu: f64, k: f64, tol: &Tolerances) -> Result<f64> {
    check_range("strike", k, k >= 0.0 && k.is_finite(), ">= 0")?;
    let q = vanilla_moment_matrix(f, nu)?;
    let lambda = QuantityVector::new(vec![1.0, -k])?;
    Ok(positive_eigenvalue_bound(&q, &lambda, tol)?.bound)
}

/// CDF implied by the bound, `1 + ∂bound/∂k`.
///
/// At `k = 0` this reports the right limit `ν`, the point mass at zero. With
/// `ν = 0` the distribution is a point mass at `f` and the right-continuous
/// value `1` is returned at `k = f`.
pub fn implied_cdf(f: f64, nu: f64, k: f64) -> Result<f64> {
    check_positive("forward", f)?;
    check_unit_interval("root_variance", nu)?;
    check_range("strike", k, k >= 0.0 && k.is_finite(), ">= 0")?;
    if k == 0.0 {
        return Ok(nu);
    }
    let disc = (f - k).hypot(2.0 * (f * k * nu).sqrt());
    if disc == 0.0 {
        return Ok(1.0);
    }
    Ok((0.5 + (2.0 * f * nu - (f - k)) / (2.0 * disc)).clamp(0.0, 1.0))
}

/// Bound, implied lognormal volatility and implied CDF across a strike grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VanillaBoundCurve {
    pub forward: f64,
    pub root_variance: f64,
    pub expiry: f64,
    pub strikes: Vec<f64>,
    pub bounds: Vec<f64>,
    /// `+∞` where the bound reaches the forward.
    pub implied_vols: Vec<f64>,
    pub cdf: Vec<f64>,
}

/// Evaluates the bound curve and checks it is decreasing, convex and has a
/// non-decreasing CDF.
pub fn smile_curve(f: f64, nu: f64, strikes: &[f64], expiry: f64) -> Result<VanillaBoundCurve> {
    check_positive("expiry", expiry)?;
    check_increasing_positive(strikes)?;
    let mut bounds = Vec::with_capacity(strikes.len());
    let mut implied_vols = Vec::with_capacity(strikes.len());
    let mut cdf = Vec::with_capacity(strikes.len());
    for &k in strikes {
        let b = vanilla_bound(f, nu, k)?;
        bounds.push(b);
        implied_vols.push(implied_lognormal_vol(f, k, expiry, b.min(f))?);
        cdf.push(implied_cdf(f, nu, k)?);
    }
    check_decreasing_convex(strikes, &bounds, 1e-10)?;
    if cdf.windows(2).any(|w| w[1] < w[0] - 1e-12) {
        return Err(BoundError::ShapeViolation("implied CDF decreases".into()));
    }
    Ok(VanillaBoundCurve {
        forward: f,
        root_variance: nu,
        expiry,
        strikes: strikes.to_vec(),
        bounds,
        implied_vols,
        cdf,
    })
}

pub(crate) fn check_increasing_positive(strikes: &[f64]) -> Result<()> {
    if strikes.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
        return Err(BoundError::InvalidPartition("strikes must be positive".into()));
    }
    if strikes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BoundError::InvalidPartition("strikes must be strictly increasing".into()));
    }
    Ok(())
}

/// Checks that `values` is non-increasing and convex on the (possibly uneven)
/// grid `xs`, allowing violations up to `slack` in the second differences.
pub fn check_decreasing_convex(xs: &[f64], values: &[f64], slack: f64) -> Result<()> {
    if xs.len() != values.len() {
        return Err(BoundError::DimensionMismatch {
            expected: xs.len(),
            found: values.len(),
        });
    }
    for (i, w) in values.windows(2).enumerate() {
        if w[1] - w[0] > slack {
            return Err(BoundError::ShapeViolation(format!(
                "value increases between x = {} and x = {}",
                xs[i],
                xs[i + 1]
            )));
        }
    }
    for i in 1..values.len().saturating_sub(1) {
        let s_left = (values[i] - values[i - 1]) / (xs[i] - xs[i - 1]);
        let s_right = (values[i + 1] - values[i]) / (xs[i + 1] - xs[i]);
        // Divided second difference scaled back to a plain second difference.
        let h = 0.5 * (xs[i + 1] - xs[i - 1]);
        if (s_right - s_left) * h < -slack {
            return Err(BoundError::ShapeViolation(format!(
                "convexity fails at x = {} (second difference {:e})",
                xs[i],
                (s_right - s_left) * h
            )));
        }
    }
    Ok(())
}

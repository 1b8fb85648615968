//! Implied lognormal (Black) and normal (Bachelier) volatilities.

use super::lognormal::LognormalModel;
use super::normal::{norm_cdf, norm_pdf};
use crate::error::{check_positive, BoundError, Result};

const BISECTION_STEPS: usize = 200;
const INITIAL_UPPER_VOL: f64 = 10.0;

/// Undiscounted Bachelier call price.
pub fn bachelier_call_price(f: f64, k: f64, t: f64, normal_vol: f64) -> f64 {
    let s = normal_vol * t.sqrt();
    if s == 0.0 {
        return (f - k).max(0.0);
    }
    let d = (f - k) / s;
    (f - k) * norm_cdf(d) + s * norm_pdf(d)
}

/// Black volatility reproducing an undiscounted call price.
///
/// Returns `0` at intrinsic value and `+∞` when the price reaches the forward
/// (within `1e−14`), the no-arbitrage ceiling of a call.
pub fn implied_lognormal_vol(f: f64, k: f64, t: f64, price: f64) -> Result<f64> {
    check_positive("forward", f)?;
    check_positive("strike", k)?;
    check_positive("expiry", t)?;
    let intrinsic = (f - k).max(0.0);
    let slack = 1e-14 * f.max(k);
    if !(price >= intrinsic - slack && price <= f + slack) {
        return Err(BoundError::PriceOutsideArbitrageBounds {
            price,
            lower: intrinsic,
            upper: f,
        });
    }
    if price >= f - 1e-14 {
        return Ok(f64::INFINITY);
    }
    if price <= intrinsic {
        return Ok(0.0);
    }
    let price_at = |vol: f64| -> f64 {
        LognormalModel::new(f, vol, t)
            .and_then(|m| m.call_price(k))
            .unwrap_or(f64::NAN)
    };

    let mut hi = INITIAL_UPPER_VOL;
    while price_at(hi) < price {
        hi *= 2.0;
        if hi > 1e6 {
            return Ok(f64::INFINITY);
        }
    }
    let vol = bisect(price_at, price, 0.0, hi);
    Ok(polish(vol, price, price_at, |v| {
        let s = v * t.sqrt();
        let d1 = ((f / k).ln() + 0.5 * s * s) / s;
        f * norm_pdf(d1) * t.sqrt()
    }))
}

/// Bachelier volatility reproducing an undiscounted call price.
///
/// Forwards and strikes may be negative.
pub fn implied_normal_vol(f: f64, k: f64, t: f64, price: f64) -> Result<f64> {
    check_positive("expiry", t)?;
    if !f.is_finite() || !k.is_finite() {
        return Err(BoundError::ParameterOutOfRange {
            name: "forward/strike",
            value: f64::NAN,
            expected: "finite",
        });
    }
    let intrinsic = (f - k).max(0.0);
    let slack = 1e-14 * f.abs().max(k.abs()).max(1.0);
    if !(price >= intrinsic - slack) || !price.is_finite() {
        return Err(BoundError::PriceOutsideArbitrageBounds {
            price,
            lower: intrinsic,
            upper: f64::INFINITY,
        });
    }
    if price <= intrinsic {
        return Ok(0.0);
    }
    let price_at = |vol: f64| bachelier_call_price(f, k, t, vol);
    // ATM Bachelier price is σ√(T/2π); start above that guess.
    let mut hi = 2.0 * (price + (f - k).abs()) * (2.0 * std::f64::consts::PI / t).sqrt();
    while price_at(hi) < price {
        hi *= 2.0;
    }
    let vol = bisect(price_at, price, 0.0, hi);
    Ok(polish(vol, price, price_at, |v| {
        let s = v * t.sqrt();
        norm_pdf((f - k) / s) * t.sqrt()
    }))
}

fn bisect<F: Fn(f64) -> f64>(price_at: F, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if price_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// A few Newton steps, each kept only if it reduces the pricing error.
fn polish<F: Fn(f64) -> f64, V: Fn(f64) -> f64>(vol: f64, target: f64, price_at: F, vega: V) -> f64 {
    let mut best = vol;
    let mut best_err = (price_at(vol) - target).abs();
    for _ in 0..3 {
        let v = vega(best);
        if !(v > 0.0) || !v.is_finite() {
            break;
        }
        let cand = best - (price_at(best) - target) / v;
        if !(cand > 0.0) || !cand.is_finite() {
            break;
        }
        let err = (price_at(cand) - target).abs();
        if err < best_err {
            best = cand;
            best_err = err;
        } else {
            break;
        }
    }
    best
}

use std::f64::consts::PI;

use super::normal::{norm_cdf, norm_cdf_diff};
use super::quadrature::{adaptive_over_breakpoints, AdaptiveOptions, Integral};
use crate::error::{check_positive, check_range, BoundError, Result};

/// Lognormal (Black) model for an asset with forward `f`, volatility `σ` and expiry `T`.
///
/// Prices are undiscounted. A zero volatility is a point mass at the forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalModel {
    forward: f64,
    vol: f64,
    expiry: f64,
}

impl LognormalModel {
    pub fn new(forward: f64, vol: f64, expiry: f64) -> Result<Self> {
        check_positive("forward", forward)?;
        check_range("vol", vol, vol >= 0.0 && vol.is_finite(), ">= 0")?;
        check_positive("expiry", expiry)?;
        Ok(Self {
            forward,
            vol,
            expiry,
        })
    }

    pub fn forward(&self) -> f64 {
        self.forward
    }

    pub fn vol(&self) -> f64 {
        self.vol
    }

    pub fn expiry(&self) -> f64 {
        self.expiry
    }

    /// σ√T.
    pub fn total_std(&self) -> f64 {
        self.vol * self.expiry.sqrt()
    }

    fn total_var(&self) -> f64 {
        self.vol * self.vol * self.expiry
    }

    /// Root-variance `1 − E[√a]²/E[a] = 1 − exp(−σ²T/4)`.
    pub fn root_variance(&self) -> f64 {
        -(-0.25 * self.total_var()).exp_m1()
    }

    /// `E[a^p] = f^p exp(p(p−1)σ²T/2)`.
    pub fn moment(&self, p: f64) -> f64 {
        self.forward.powf(p) * (0.5 * p * (p - 1.0) * self.total_var()).exp()
    }

    /// `E[a^p · 1{l < a ≤ u}]` for `0 ≤ l ≤ u ≤ ∞`.
    pub fn partial_moment(&self, p: f64, l: f64, u: f64) -> Result<f64> {
        if !(l >= 0.0 && u >= l) || l.is_infinite() || !p.is_finite() {
            return Err(BoundError::ParameterOutOfRange {
                name: "partial moment interval",
                value: l,
                expected: "0 <= l <= u",
            });
        }
        if l == u {
            return Ok(0.0);
        }
        let s = self.total_std();
        if s == 0.0 {
            let f = self.forward;
            return Ok(if l < f && f <= u { f.powf(p) } else { 0.0 });
        }
        let h = |x: f64| -> f64 {
            if x == 0.0 {
                f64::NEG_INFINITY
            } else if x.is_infinite() {
                f64::INFINITY
            } else {
                ((x / self.forward).ln() + (0.5 - p) * s * s) / s
            }
        };
        Ok(self.moment(p) * norm_cdf_diff(h(l), h(u)))
    }

    /// Undiscounted call price `E[(a − k)⁺]`.
    pub fn call_price(&self, k: f64) -> Result<f64> {
        check_range("strike", k, k >= 0.0 && k.is_finite(), ">= 0")?;
        let f = self.forward;
        let s = self.total_std();
        if k == 0.0 {
            return Ok(f);
        }
        if s == 0.0 {
            return Ok((f - k).max(0.0));
        }
        let d1 = ((f / k).ln() + 0.5 * s * s) / s;
        let d2 = d1 - s;
        let price = f * norm_cdf(d1) - k * norm_cdf(d2);
        Ok(price.max((f - k).max(0.0)).min(f))
    }

    /// Undiscounted put price `E[(k − a)⁺]`.
    pub fn put_price(&self, k: f64) -> Result<f64> {
        check_range("strike", k, k >= 0.0 && k.is_finite(), ">= 0")?;
        let f = self.forward;
        let s = self.total_std();
        if k == 0.0 {
            return Ok(0.0);
        }
        if s == 0.0 {
            return Ok((k - f).max(0.0));
        }
        let d1 = ((f / k).ln() + 0.5 * s * s) / s;
        let d2 = d1 - s;
        Ok((k * norm_cdf(-d2) - f * norm_cdf(-d1)).max((k - f).max(0.0)))
    }

    /// Probability density of the asset at `a > 0`.
    pub fn density(&self, a: f64) -> f64 {
        let s = self.total_std();
        if a <= 0.0 || !a.is_finite() || s == 0.0 {
            return 0.0;
        }
        let z = ((a / self.forward).ln() + 0.5 * s * s) / s;
        (-0.5 * z * z).exp() / (a * s * (2.0 * PI).sqrt())
    }

    /// `E[g(a) · 1{l < a < u}]` by adaptive quadrature against the density.
    ///
    /// A semi-infinite upper cell `(b, ∞)` is mapped to `(0, 1]` with `a = b/t`.
    /// Intervals starting at zero and reaching infinity are split at the forward.
    pub fn expectation<G: Fn(f64) -> f64>(
        &self,
        g: G,
        l: f64,
        u: f64,
        opts: &AdaptiveOptions,
    ) -> Result<Integral> {
        if !(l >= 0.0 && u > l) {
            return Err(BoundError::ParameterOutOfRange {
                name: "expectation interval",
                value: l,
                expected: "0 <= l < u",
            });
        }
        if self.total_std() == 0.0 {
            let f = self.forward;
            let v = if l < f && f < u { g(f) } else { 0.0 };
            return Ok(Integral {
                value: v,
                error_estimate: 0.0,
                panels: 0,
            });
        }
        let weighted = |a: f64| {
            let d = self.density(a);
            if d == 0.0 {
                0.0
            } else {
                g(a) * d
            }
        };
        if u.is_finite() {
            return adaptive_over_breakpoints(weighted, &[l, u], opts);
        }
        let (head, b) = if l == 0.0 {
            let head = adaptive_over_breakpoints(&weighted, &[0.0, self.forward], opts)?;
            (Some(head), self.forward)
        } else {
            (None, l)
        };
        let tail = adaptive_over_breakpoints(
            |t: f64| {
                if t <= 0.0 {
                    0.0
                } else {
                    let a = b / t;
                    weighted(a) * b / (t * t)
                }
            },
            &[0.0, 1.0],
            opts,
        )?;
        Ok(match head {
            Some(h) => Integral {
                value: h.value + tail.value,
                error_estimate: h.error_estimate + tail.error_estimate,
                panels: h.panels + tail.panels,
            },
            None => tail,
        })
    }
}

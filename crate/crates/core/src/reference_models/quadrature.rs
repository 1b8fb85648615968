//! Gauss-Legendre quadrature, fixed-order and with adaptive panel bisection.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{BoundError, Result};

/// Nodes and weights of the n-point Gauss-Legendre rule on [−1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the rule by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared instance for `n` nodes.
    pub fn cached(n: usize) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry(n)
            .or_insert_with(|| Arc::new(GaussLegendre::new(n)))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// ∫ₗᵘ f(x) dx.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, l: f64, u: f64) -> f64 {
        let half = 0.5 * (u - l);
        let mid = 0.5 * (u + l);
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum();
        s * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// ∫ₗᵘ f(x) dx with an `n_nodes`-point rule. Exact for polynomials of degree ≤ 2n − 1.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, l: f64, u: f64, n_nodes: usize) -> f64 {
    GaussLegendre::cached(n_nodes).integrate(f, l, u)
}

/// Settings for [`adaptive_gauss_legendre`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub nodes: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            nodes: 64,
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            max_panels: 4096,
        }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    pub panels: usize,
}

/// Adaptive composite Gauss-Legendre over [l, u].
///
/// Each panel is compared with the sum over its two halves; panels whose
/// difference exceeds their share of the tolerance are bisected. The error
/// estimate is the sum of accepted differences, which overstates the error of
/// the refined sum.
pub fn adaptive_gauss_legendre<F: Fn(f64) -> f64>(
    f: F,
    l: f64,
    u: f64,
    opts: &AdaptiveOptions,
) -> Result<Integral> {
    adaptive_over_breakpoints(f, &[l, u], opts)
}

/// Like [`adaptive_gauss_legendre`] but starting from the panels between the
/// given increasing breakpoints.
pub fn adaptive_over_breakpoints<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    opts: &AdaptiveOptions,
) -> Result<Integral> {
    let rule = GaussLegendre::cached(opts.nodes);
    if breakpoints.len() < 2 {
        return Ok(Integral {
            value: 0.0,
            error_estimate: 0.0,
            panels: 0,
        });
    }
    let total_width = breakpoints.last().unwrap() - breakpoints[0];
    if total_width == 0.0 {
        return Ok(Integral {
            value: 0.0,
            error_estimate: 0.0,
            panels: 0,
        });
    }

    let mut stack: Vec<(f64, f64, f64)> = breakpoints
        .windows(2)
        .rev()
        .map(|w| (w[0], w[1], rule.integrate(&f, w[0], w[1])))
        .collect();
    // Magnitude for the relative tolerance.
    let scale: f64 = stack.iter().map(|p| p.2.abs()).sum();
    let tol = opts.abs_tol.max(opts.rel_tol * scale);

    let mut accepted: Vec<(f64, f64, f64)> = Vec::new();
    let mut panels = stack.len();
    while let Some((a, b, whole)) = stack.pop() {
        let m = 0.5 * (a + b);
        let left = rule.integrate(&f, a, m);
        let right = rule.integrate(&f, m, b);
        let diff = (left + right - whole).abs();
        let share = tol * (b - a) / total_width;
        if !diff.is_finite() {
            return Err(BoundError::QuadratureBudgetExceeded {
                tolerance: tol,
                panels,
                estimate: f64::NAN,
            });
        }
        if diff <= share || m <= a || m >= b {
            accepted.push((a, left + right, diff));
            continue;
        }
        panels += 1;
        if panels > opts.max_panels {
            let estimate = diff + accepted.iter().map(|p| p.2).sum::<f64>();
            return Err(BoundError::QuadratureBudgetExceeded {
                tolerance: tol,
                panels,
                estimate,
            });
        }
        stack.push((m, b, right));
        stack.push((a, m, left));
    }
    // Panels are accepted left to right, so the summation order is fixed.
    Ok(Integral {
        value: accepted.iter().map(|p| p.1).sum(),
        error_estimate: accepted.iter().map(|p| p.2).sum(),
        panels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_cubic() {
        assert!((gauss_legendre(|_| 1.0, 0.0, 1.0, 1) - 1.0).abs() < 1e-15);
        assert!((gauss_legendre(|x| x * x * x, 0.0, 1.0, 2) - 0.25).abs() < 1e-15);
        assert!((gauss_legendre(|_| 2.0 * 0.5, 0.0, 1.0, 5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn polynomial_exactness_up_to_degree_2n_minus_1() {
        for n in [3usize, 8, 17, 64] {
            let deg = 2 * n - 1;
            // ∫₀¹ x^d dx = 1/(d+1)
            let got = gauss_legendre(|x| x.powi(deg as i32) + x.powi(deg as i32 - 1), 0.0, 1.0, n);
            let want = 1.0 / (deg as f64 + 1.0) + 1.0 / deg as f64;
            assert!((got - want).abs() < 1e-14, "n={n} got={got} want={want}");
        }
    }

    #[test]
    fn weights_sum_to_two() {
        for n in [1usize, 2, 5, 64, 128] {
            let r = GaussLegendre::new(n);
            let s: f64 = r.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-14, "n={n} s={s}");
            assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let opts = AdaptiveOptions {
            nodes: 16,
            ..Default::default()
        };
        let r = adaptive_gauss_legendre(|x: f64| x.sqrt(), 0.0, 1.0, &opts).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-12, "{r:?}");
        assert!(r.panels > 1);
    }

    #[test]
    fn adaptive_budget_exceeded() {
        let opts = AdaptiveOptions {
            nodes: 4,
            abs_tol: 1e-15,
            rel_tol: 0.0,
            max_panels: 8,
        };
        let err = adaptive_gauss_legendre(|x: f64| x.powf(-0.9), 0.0, 1.0, &opts).unwrap_err();
        assert!(matches!(err, BoundError::QuadratureBudgetExceeded { .. }));
    }
}

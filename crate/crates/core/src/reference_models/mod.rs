//! Oracle models: Black-Scholes prices and partial moments, implied
//! volatilities, the two-state binomial model and quadrature.

mod binomial;
mod implied;
mod lognormal;
mod normal;
mod quadrature;

pub use binomial::{binomial_price, BinomialModel};
pub use implied::{bachelier_call_price, implied_lognormal_vol, implied_normal_vol};
pub use lognormal::LognormalModel;
pub use normal::{norm_cdf, norm_cdf_diff, norm_pdf};
pub use quadrature::{
    adaptive_gauss_legendre, adaptive_over_breakpoints, gauss_legendre, AdaptiveOptions,
    GaussLegendre, Integral,
};

use crate::error::Result;

/// Undiscounted Black call price.
pub fn bs_call_price(model: &LognormalModel, k: f64) -> Result<f64> {
    model.call_price(k)
}

/// `E[a^p · 1{l < a ≤ u}]` under the lognormal model.
pub fn lognormal_partial_moment(model: &LognormalModel, p: f64, l: f64, u: f64) -> Result<f64> {
    model.partial_moment(p, l, u)
}

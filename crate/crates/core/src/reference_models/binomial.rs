use crate::error::{check_range, BoundError, Result};

/// Two-state model with spectrum `{a₋, a₊}` and weights `sin²χ`, `cos²χ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialModel {
    pub a_minus: f64,
    pub a_plus: f64,
    pub chi: f64,
}

impl BinomialModel {
    pub fn new(a_minus: f64, a_plus: f64, chi: f64) -> Result<Self> {
        check_range("a_minus", a_minus, a_minus >= 0.0 && a_minus.is_finite(), ">= 0")?;
        check_range("a_plus", a_plus, a_plus >= 0.0 && a_plus.is_finite(), ">= 0")?;
        let upper = std::f64::consts::FRAC_PI_2;
        if !(chi > 0.0 && chi < upper) {
            return Err(BoundError::AngleOutOfRange {
                chi,
                lower: 0.0,
                upper,
            });
        }
        Ok(Self {
            a_minus,
            a_plus,
            chi,
        })
    }

    /// Weight `sin²χ` on `a₋`.
    pub fn weight_minus(&self) -> f64 {
        self.chi.sin().powi(2)
    }

    /// Weight `cos²χ` on `a₊`.
    pub fn weight_plus(&self) -> f64 {
        self.chi.cos().powi(2)
    }

    /// `E[payoff(a)]`.
    pub fn price<P: Fn(f64) -> f64>(&self, payoff: P) -> f64 {
        self.weight_minus() * payoff(self.a_minus) + self.weight_plus() * payoff(self.a_plus)
    }
}

/// Free-function form of [`BinomialModel::price`].
pub fn binomial_price<P: Fn(f64) -> f64>(model: &BinomialModel, payoff: P) -> f64 {
    model.price(payoff)
}

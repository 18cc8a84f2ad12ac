//! Closed-form demands and expenditure for the three worked two-good
//! examples. These are oracles for the numerical solvers.

use serde::Serialize;

use crate::error::{Error, Result};

fn check_positive(name: &str, values: &[f64]) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} must be strictly positive, got {v}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha == 0.0 || alpha == 1.0 {
        return Err(Error::InvalidParameter(format!("alpha must be finite and not 0 or 1, got {alpha}")));
    }
    Ok(())
}

/// Optimal consumption ratio `x1 / x2 = [p1 z12 / (p2 z11)]^(1 / (alpha - 1))`.
fn ratio_k(alpha: f64, prices: [f64; 2], z1: [f64; 2]) -> f64 {
    (prices[0] * z1[1] / (prices[1] * z1[0])).powf(1.0 / (alpha - 1.0))
}

/// Closed forms for `u = x1^a z11 + x2^a z12`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Example1Solution {
    pub alpha: f64,
    pub prices: [f64; 2],
    pub z1: [f64; 2],
    pub k: f64,
    pub demand: [f64; 2],
    pub indirect_utility: f64,
}

impl Example1Solution {
    /// `e(u) = (k p1 + p2) [u / (k^a z11 + z12)]^(1/a)`.
    pub fn expenditure_at(&self, u: f64) -> Result<f64> {
        if !(u > 0.0) {
            return Err(Error::Domain(format!("expenditure needs a positive utility level, got {u}")));
        }
        let base = u / (self.k.powf(self.alpha) * self.z1[0] + self.z1[1]);
        Ok((self.k * self.prices[0] + self.prices[1]) * base.powf(1.0 / self.alpha))
    }
}

pub fn example1_closed_forms(alpha: f64, prices: [f64; 2], income: f64, z1: [f64; 2]) -> Result<Example1Solution> {
    check_alpha(alpha)?;
    check_positive("prices", &prices)?;
    check_positive("income", &[income])?;
    check_positive("z1", &z1)?;
    let k = ratio_k(alpha, prices, z1);
    let x2 = income / (prices[0] * k + prices[1]);
    let indirect_utility = (k.powf(alpha) * z1[0] + z1[1]) * x2.powf(alpha);
    Ok(Example1Solution { alpha, prices, z1, k, demand: [k * x2, x2], indirect_utility })
}

/// Closed forms for `h = ln(x1^a z11 + x2^a z12) + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Example2Solution {
    pub k: f64,
    pub expenditure: f64,
    pub hicksian: [f64; 2],
}

pub fn example2_closed_forms(
    alpha: f64,
    prices: [f64; 2],
    z1: [f64; 2],
    u: f64,
    offset: f64,
) -> Result<Example2Solution> {
    check_alpha(alpha)?;
    check_positive("prices", &prices)?;
    check_positive("z1", &z1)?;
    if !u.is_finite() || !offset.is_finite() {
        return Err(Error::Domain(format!("utility level {u} outside the range of the log transform")));
    }
    let k = ratio_k(alpha, prices, z1);
    let x2 = ((u - offset).exp() / (k.powf(alpha) * z1[0] + z1[1])).powf(1.0 / alpha);
    let hicksian = [k * x2, x2];
    Ok(Example2Solution { k, expenditure: prices[0] * hicksian[0] + prices[1] * hicksian[1], hicksian })
}

/// `e = 2 (u - (z11 z12)^(1/d))^(d/2) (p1 p2)^(1/2)` for
/// `u = (x1 x2)^(1/d) + (z11 z12)^(1/d)`.
pub fn example3_expenditure(delta: f64, prices: [f64; 2], z1: [f64; 2], u: f64) -> Result<f64> {
    check_positive("delta", &[delta])?;
    check_positive("prices", &prices)?;
    check_positive("z1", &z1)?;
    let floor = (z1[0] * z1[1]).powf(1.0 / delta);
    let private = u - floor;
    if private < 0.0 || !private.is_finite() {
        return Err(Error::Domain(format!(
            "utility {u} lies below the public-good floor {floor}"
        )));
    }
    Ok(2.0 * private.powf(delta / 2.0) * (prices[0] * prices[1]).sqrt())
}

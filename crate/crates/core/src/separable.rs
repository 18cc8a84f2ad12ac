//! Additively separable preferences `u(x, z) = u1(x) + u2(z)`.
//!
//! Public goods only shift the target the private sub-utility must reach, so
//! `e(u, p; z) = e1(u - u2(z), p)`. When `u1` is homogeneous of degree `gamma`
//! this has the closed form `[(u - u2(z)) / v1(1, p)]^(1/gamma)`.
//!
//! The expenditure function is homogeneous in `z1` only in special cases; the
//! slope of `ln e` against `ln t` generally depends on the utility level, which
//! [`level_slopes`] exposes.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::duality::{maximize_objective, minimize_expenditure, DEFAULT_UMP_TOL};
use crate::error::{Error, Result};
use crate::homogeneity::{estimate_degree, ScaleDirection};
use crate::numeric::{fit_line, halton_point};
use crate::utility::{PublicBundle, PriceIncome};

type PrivateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type PublicFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

const DEGREE_TOL: f64 = 1e-8;
const DEGREE_GRID: [f64; 3] = [0.5, 2.0, 10.0];
const DEGREE_POINTS: u64 = 8;

#[derive(Clone)]
pub struct SeparableSpec {
    n_private: usize,
    private: PrivateFn,
    public: PublicFn,
    gamma: Option<f64>,
    private_infimum: f64,
    // v1(1, p), keyed by the bit patterns of p.
    unit_value: Arc<RwLock<HashMap<Vec<u64>, f64>>>,
}

impl fmt::Debug for SeparableSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SeparableSpec")
            .field("n_private", &self.n_private)
            .field("gamma", &self.gamma)
            .field("private_infimum", &self.private_infimum)
            .finish_non_exhaustive()
    }
}

impl SeparableSpec {
    /// `gamma`, when given, is checked against `u1` on a spread of points.
    /// `private_infimum` is the greatest lower bound of `u1` on the orthant.
    pub fn new<P, Q>(n_private: usize, private: P, public: Q, gamma: Option<f64>, private_infimum: f64) -> Result<Self>
    where
        P: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        Q: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        if n_private == 0 {
            return Err(Error::InvalidParameter("at least one private good is required".into()));
        }
        if !private_infimum.is_finite() {
            return Err(Error::InvalidParameter(format!("infimum must be finite, got {private_infimum}")));
        }
        let private: PrivateFn = Arc::new(private);
        if let Some(g) = gamma {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::InvalidParameter(format!("gamma must be positive, got {g}")));
            }
            for i in 0..DEGREE_POINTS {
                let x = halton_point(i, n_private, 0.5, 2.0);
                let est = estimate_degree(|p| Ok(private(p)), &x, &ScaleDirection::All, &DEGREE_GRID)?;
                if (est.degree - g).abs() > DEGREE_TOL || !est.is_homogeneous(DEGREE_TOL) {
                    return Err(Error::DeclarationRejected(format!(
                        "private sub-utility has degree {} at {x:?}, declared {g}",
                        est.degree
                    )));
                }
            }
        }
        Ok(Self {
            n_private,
            private,
            public: Arc::new(public),
            gamma,
            private_infimum,
            unit_value: Arc::default(),
        })
    }

    /// `(x1 x2)^(1/alpha) + (z11 z12)^(1/beta)`.
    pub fn example3(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha and beta must be positive, got {alpha}, {beta}")));
        }
        Self::new(
            2,
            move |x| (x[0] * x[1]).powf(1.0 / alpha),
            move |z1, _| (z1[0] * z1[1]).powf(1.0 / beta),
            Some(2.0 / alpha),
            0.0,
        )
    }

    pub fn n_private(&self) -> usize {
        self.n_private
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn private_utility(&self, x: &[f64]) -> f64 {
        (self.private)(x)
    }

    pub fn public_utility(&self, z: &PublicBundle) -> f64 {
        (self.public)(z.z1(), z.z2())
    }

    pub fn utility(&self, x: &[f64], z: &PublicBundle) -> f64 {
        self.private_utility(x) + self.public_utility(z)
    }

    fn check_prices(&self, prices: &[f64]) -> Result<()> {
        if prices.len() != self.n_private {
            return Err(Error::DimensionMismatch { what: "prices", expected: self.n_private, found: prices.len() });
        }
        // Reuse the shared price validation.
        PriceIncome::new(prices.to_vec(), 1.0).map(|_| ())
    }

    /// Maximized private sub-utility at unit income, cached per price vector.
    pub fn unit_indirect_utility(&self, prices: &[f64]) -> Result<f64> {
        self.check_prices(prices)?;
        let key: Vec<u64> = prices.iter().map(|p| p.to_bits()).collect();
        if let Some(v) = self.unit_value.read().ok().and_then(|m| m.get(&key).copied()) {
            return Ok(v);
        }
        let (_, v) = maximize_objective(|x| Ok(self.private_utility(x)), prices, 1.0, DEFAULT_UMP_TOL)?;
        if let Ok(mut map) = self.unit_value.write() {
            map.entry(key).or_insert(v);
        }
        Ok(v)
    }

    fn shifted_target(&self, u: f64, z: &PublicBundle) -> Result<f64> {
        if !u.is_finite() {
            return Err(Error::InvalidParameter(format!("target utility must be finite, got {u}")));
        }
        let w = u - self.public_utility(z);
        if w < self.private_infimum {
            return Err(Error::Domain(format!(
                "target {u} is below what public goods alone provide; private target {w} < infimum {}",
                self.private_infimum
            )));
        }
        Ok(w)
    }
}

/// Expenditure by a private-only minimization at the shifted target.
pub fn separable_expenditure(s: &SeparableSpec, u: f64, prices: &[f64], z: &PublicBundle, tol: f64) -> Result<f64> {
    s.check_prices(prices)?;
    let w = s.shifted_target(u, z)?;
    if w == s.private_infimum {
        return Ok(0.0);
    }
    let floor = |x: &[f64]| Some(s.private_utility(x)).filter(|v| v.is_finite());
    let out = minimize_expenditure(|x| Ok(s.private_utility(x)), floor, w, prices, tol)?;
    Ok(out.expenditure)
}

/// `[(u - u2(z)) / v1(1, p)]^(1/gamma)`.
pub fn separable_expenditure_closed(s: &SeparableSpec, u: f64, prices: &[f64], z: &PublicBundle, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let w = s.shifted_target(u, z)?;
    if w <= 0.0 {
        return Ok(0.0);
    }
    let v1 = s.unit_indirect_utility(prices)?;
    if !(v1 > 0.0) {
        return Err(Error::Degenerate(format!("unit-income sub-utility is {v1}")));
    }
    Ok((w / v1).powf(1.0 / gamma))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelSlope {
    pub utility: f64,
    /// Fitted slope of `ln e(u; t z1)` against `ln t`.
    pub slope: f64,
}

/// Scaling slope of expenditure in `z1` at each utility level. Differing
/// slopes witness that `e` is not homogeneous in public goods.
pub fn level_slopes(
    s: &SeparableSpec,
    levels: &[f64],
    prices: &[f64],
    z: &PublicBundle,
    t_grid: &[f64],
    tol: f64,
) -> Result<Vec<LevelSlope>> {
    if t_grid.len() < 2 {
        return Err(Error::Degenerate("slope fitting needs at least 2 grid values".into()));
    }
    levels
        .iter()
        .map(|&u| {
            let mut xs = Vec::with_capacity(t_grid.len());
            let mut ys = Vec::with_capacity(t_grid.len());
            for &t in t_grid {
                let e = separable_expenditure(s, u, prices, &z.scaled(t)?, tol)?;
                if !(e > 0.0) {
                    return Err(Error::Domain(format!("expenditure {e} at u = {u}, t = {t} has no logarithm")));
                }
                xs.push(t.ln());
                ys.push(e.ln());
            }
            let (_, slope) = fit_line(&xs, &ys).ok_or_else(|| Error::Degenerate("t grid has no spread".into()))?;
            Ok(LevelSlope { utility: u, slope })
        })
        .collect()
}

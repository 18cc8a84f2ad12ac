//! Domain types and the utility-function registry.
//!
//! A utility is represented as `h(x; z1, z2) = g(u(x; z1, z2))`: a strictly
//! increasing transform `g` applied to an underlying function `u`. The
//! built-in families cover the power-weighted form `sum_n x_n^a z1_n` (with
//! and without a log transform) and the additively separable form
//! `(x1 x2)^(1/a) + (z11 z12)^(1/b)`. Callers can also supply their own
//! homogeneous underlying function, whose declared degrees are verified on
//! construction.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::halton_point;

/// A bundle of private goods, every quantity non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PrivateBundle(Vec<f64>);

impl PrivateBundle {
    pub fn new(quantities: Vec<f64>) -> Result<Self> {
        if quantities.is_empty() {
            return Err(Error::InvalidParameter("private bundle must have at least one good".into()));
        }
        if let Some(q) = quantities.iter().find(|q| !(**q >= 0.0) || !q.is_finite()) {
            return Err(Error::InvalidParameter(format!("private quantity {q} is not a finite non-negative number")));
        }
        Ok(Self(quantities))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for PrivateBundle {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PrivateBundle> for Vec<f64> {
    fn from(b: PrivateBundle) -> Self {
        b.0
    }
}

/// Public goods split into the homogeneity-bearing block `z1` and the
/// auxiliary block `z2`, which is never scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicBundle {
    z1: Vec<f64>,
    #[serde(default)]
    z2: Vec<f64>,
}

impl PublicBundle {
    pub fn new(z1: Vec<f64>, z2: Vec<f64>) -> Result<Self> {
        if z1.is_empty() {
            return Err(Error::InvalidParameter("z1 must contain at least one public good".into()));
        }
        if let Some(v) = z1.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("z1 component {v} must be strictly positive")));
        }
        if let Some(v) = z2.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("z2 component {v} must be non-negative")));
        }
        Ok(Self { z1, z2 })
    }

    /// Bundle with an empty auxiliary block.
    pub fn from_z1(z1: Vec<f64>) -> Result<Self> {
        Self::new(z1, Vec::new())
    }

    pub fn z1(&self) -> &[f64] {
        &self.z1
    }

    pub fn z2(&self) -> &[f64] {
        &self.z2
    }

    /// `(t z1, z2)`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter(format!("scaling factor t must be positive, got {t}")));
        }
        Self::new(self.z1.iter().map(|v| v * t).collect(), self.z2.clone())
    }
}

/// Strictly positive prices together with strictly positive income.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceIncome {
    prices: Vec<f64>,
    income: f64,
}

impl PriceIncome {
    pub fn new(prices: Vec<f64>, income: f64) -> Result<Self> {
        validate_prices(&prices)?;
        if !(income > 0.0) || !income.is_finite() {
            return Err(Error::InvalidParameter(format!("income must be positive, got {income}")));
        }
        Ok(Self { prices, income })
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn income(&self) -> f64 {
        self.income
    }

    pub fn with_income(&self, income: f64) -> Result<Self> {
        Self::new(self.prices.clone(), income)
    }
}

pub(crate) fn validate_prices(prices: &[f64]) -> Result<()> {
    if prices.is_empty() {
        return Err(Error::InvalidParameter("at least one price is required".into()));
    }
    if let Some(p) = prices.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
        return Err(Error::InvalidParameter(format!("price {p} must be strictly positive")));
    }
    Ok(())
}

/// Degrees of homogeneity of an independently homogeneous underlying function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomogeneityDegrees {
    /// Degree in the private goods.
    pub eta: f64,
    /// Degree in `z1`.
    pub theta: f64,
    /// Joint degree, always `eta + theta`.
    pub gamma: f64,
    /// Sufficient statistic `-theta / eta`.
    pub phi: f64,
}

impl HomogeneityDegrees {
    pub fn new(eta: f64, theta: f64) -> Result<Self> {
        if eta == 0.0 || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!("private degree eta must be finite and non-zero, got {eta}")));
        }
        if !theta.is_finite() {
            return Err(Error::InvalidParameter(format!("public degree theta must be finite, got {theta}")));
        }
        Ok(Self { eta, theta, gamma: eta + theta, phi: -theta / eta })
    }
}

/// The monotone transform `g` applied to the underlying function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// `g(u) = ln(u) + offset`.
    LogPlus { offset: f64 },
}

impl Transform {
    pub fn apply(&self, u: f64) -> Result<f64> {
        match *self {
            Transform::Identity => Ok(u),
            Transform::LogPlus { offset } => {
                if !(u > 0.0) {
                    return Err(Error::Domain(format!("log transform undefined at u = {u}")));
                }
                Ok(u.ln() + offset)
            }
        }
    }

    /// Inverse of [`Transform::apply`] on its range.
    pub fn inverse(&self, y: f64) -> f64 {
        match *self {
            Transform::Identity => y,
            Transform::LogPlus { offset } => (y - offset).exp(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Transform::Identity)
    }

    /// Sampled check that `g` is strictly increasing over the given values of `u`.
    pub fn is_increasing_on(&self, samples: &[f64]) -> bool {
        let mut sorted: Vec<f64> = samples.iter().copied().filter(|v| v.is_finite()).collect();
        sorted.sort_by(|a, b| a.total_cmp(b));
        sorted.dedup();
        let mapped: Result<Vec<f64>> = sorted.iter().map(|u| self.apply(*u)).collect();
        match mapped {
            Ok(values) => values.windows(2).all(|w| w[1] > w[0]),
            Err(_) => false,
        }
    }
}

type UnderlyingFn = dyn Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync;

/// A caller-supplied underlying function with declared homogeneity degrees.
#[derive(Clone)]
pub struct GenericUtility {
    name: String,
    eval: Arc<UnderlyingFn>,
    n_private: usize,
    n_z1: usize,
    n_z2: usize,
    degrees: HomogeneityDegrees,
}

impl fmt::Debug for GenericUtility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericUtility")
            .field("name", &self.name)
            .field("n_private", &self.n_private)
            .field("n_z1", &self.n_z1)
            .field("n_z2", &self.n_z2)
            .field("degrees", &self.degrees)
            .finish()
    }
}

/// Tolerance of the definitional scaling test applied to generic declarations.
pub const DECLARATION_TOL: f64 = 1e-8;
const DECLARATION_T: [f64; 3] = [0.5, 2.0, 10.0];
const DECLARATION_POINTS: u64 = 16;

impl GenericUtility {
    /// Wraps `eval(x, z1, z2)` and verifies that it is homogeneous of degree
    /// `eta` in `x` and `theta` in `z1` on a deterministic set of probe points.
    pub fn new<F>(
        name: impl Into<String>,
        dims: (usize, usize, usize),
        eta: f64,
        theta: f64,
        eval: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        let (n_private, n_z1, n_z2) = dims;
        if n_private == 0 || n_z1 == 0 {
            return Err(Error::InvalidParameter("generic utility needs at least one private good and one z1 good".into()));
        }
        let degrees = HomogeneityDegrees::new(eta, theta)?;
        let out = Self { name: name.into(), eval: Arc::new(eval), n_private, n_z1, n_z2, degrees };
        out.verify_declaration()?;
        Ok(out)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn degrees(&self) -> HomogeneityDegrees {
        self.degrees
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_private, self.n_z1, self.n_z2)
    }

    fn verify_declaration(&self) -> Result<()> {
        let dim = self.n_private + self.n_z1 + self.n_z2;
        let scale = |v: &[f64], t: f64| v.iter().map(|c| c * t).collect::<Vec<_>>();
        for i in 0..DECLARATION_POINTS {
            let pt = halton_point(i, dim.min(16), 0.5, 3.0);
            let pt: Vec<f64> = (0..dim).map(|d| pt[d % pt.len()]).collect();
            let (x, rest) = pt.split_at(self.n_private);
            let (z1, z2) = rest.split_at(self.n_z1);
            let base = (self.eval)(x, z1, z2);
            if !(base > 0.0) || !base.is_finite() {
                return Err(Error::DeclarationRejected(format!(
                    "{} must be positive at probe points, got {base}",
                    self.name
                )));
            }
            for &t in &DECLARATION_T {
                let private = ((self.eval)(&scale(x, t), z1, z2).ln() - base.ln() - self.degrees.eta * t.ln()).abs();
                let public = ((self.eval)(x, &scale(z1, t), z2).ln() - base.ln() - self.degrees.theta * t.ln()).abs();
                if !(private < DECLARATION_TOL) {
                    return Err(Error::DeclarationRejected(format!(
                        "{} is not homogeneous of degree {} in x (log residual {private:e} at t = {t})",
                        self.name, self.degrees.eta
                    )));
                }
                if !(public < DECLARATION_TOL) {
                    return Err(Error::DeclarationRejected(format!(
                        "{} is not homogeneous of degree {} in z1 (log residual {public:e} at t = {t})",
                        self.name, self.degrees.theta
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The underlying function `u`.
#[derive(Debug, Clone)]
pub enum Family {
    /// `sum_n x_n^alpha z1_n`, with as many private goods as `z1` components.
    PowerWeighted { alpha: f64 },
    /// The power-weighted function under a log transform.
    LogTransformedPowerWeighted { alpha: f64 },
    /// `(x1 x2)^(1/alpha) + (z11 z12)^(1/beta)`.
    AdditiveSeparablePower { alpha: f64, beta: f64 },
    GenericHomothetic(GenericUtility),
}

/// Offset of the log transform used when none is given.
pub const DEFAULT_LOG_OFFSET: f64 = 5.0;

/// A homothetic utility `g(u(x; z1, z2))`. Immutable once built.
#[derive(Debug, Clone)]
pub struct UtilitySpec {
    family: Family,
    transform: Transform,
    degrees: Option<HomogeneityDegrees>,
}

impl UtilitySpec {
    /// Power-weighted utility with identity transform; `alpha` must lie in (0, 1).
    pub fn power_weighted(alpha: f64) -> Result<Self> {
        Self::power_weighted_with(alpha, false)
    }

    /// As [`UtilitySpec::power_weighted`]; `allow_any_alpha` admits any
    /// `alpha` outside {0, 1}, without a quasiconcavity guarantee.
    pub fn power_weighted_with(alpha: f64, allow_any_alpha: bool) -> Result<Self> {
        check_alpha(alpha, allow_any_alpha)?;
        Self::build(Family::PowerWeighted { alpha }, Transform::Identity)
    }

    /// Power-weighted underlying function under `g(u) = ln(u) + offset`.
    pub fn log_transformed(alpha: f64, offset: f64) -> Result<Self> {
        Self::log_transformed_with(alpha, offset, false)
    }

    pub fn log_transformed_with(alpha: f64, offset: f64, allow_any_alpha: bool) -> Result<Self> {
        check_alpha(alpha, allow_any_alpha)?;
        if !offset.is_finite() {
            return Err(Error::InvalidParameter("log transform offset must be finite".into()));
        }
        Self::build(Family::LogTransformedPowerWeighted { alpha }, Transform::LogPlus { offset })
    }

    /// Additively separable `(x1 x2)^(1/alpha) + (z11 z12)^(1/beta)`.
    ///
    /// Quasiconcavity is not certified; it holds for `alpha >= 2`.
    pub fn additive_separable(alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Self::build(Family::AdditiveSeparablePower { alpha, beta }, Transform::Identity)
    }

    pub fn generic(utility: GenericUtility, transform: Transform) -> Result<Self> {
        Self::build(Family::GenericHomothetic(utility), transform)
    }

    fn build(family: Family, transform: Transform) -> Result<Self> {
        let degrees = match &family {
            Family::PowerWeighted { alpha } | Family::LogTransformedPowerWeighted { alpha } => {
                Some(HomogeneityDegrees::new(*alpha, 1.0)?)
            }
            Family::AdditiveSeparablePower { .. } => None,
            Family::GenericHomothetic(g) => Some(g.degrees()),
        };
        let spec = Self { family, transform, degrees };
        spec.check_transform()?;
        Ok(spec)
    }

    fn check_transform(&self) -> Result<()> {
        if self.transform.is_identity() {
            return Ok(());
        }
        let (n, k1, k2) = self.sample_dims();
        let samples: Vec<f64> = (0..32)
            .filter_map(|i| {
                let pt = halton_point(i, 3, 0.1, 10.0);
                let x = vec![pt[0]; n];
                let z = PublicBundle::new(vec![pt[1]; k1], vec![pt[2]; k2]).ok()?;
                self.underlying(&x, &z).ok()
            })
            .collect();
        if !self.transform.is_increasing_on(&samples) {
            return Err(Error::InvalidParameter(
                "transform is not strictly increasing on the sampled range of u".into(),
            ));
        }
        Ok(())
    }

    fn sample_dims(&self) -> (usize, usize, usize) {
        match &self.family {
            Family::PowerWeighted { .. } | Family::LogTransformedPowerWeighted { .. } => (2, 2, 0),
            Family::AdditiveSeparablePower { .. } => (2, 2, 0),
            Family::GenericHomothetic(g) => g.dims(),
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }

    /// Declared independent degrees, `None` when `u` is not independently homogeneous.
    pub fn degrees(&self) -> Option<HomogeneityDegrees> {
        self.degrees
    }

    /// Degrees, or an error naming the spec when none are declared.
    pub fn require_degrees(&self) -> Result<HomogeneityDegrees> {
        self.degrees.ok_or_else(|| {
            Error::NotIndependentlyHomogeneous(format!("{} declares no (eta, theta)", self.family_name()))
        })
    }

    /// Joint degree of `u` in `(x, z1)`, when it exists.
    pub fn joint_degree(&self) -> Option<f64> {
        match &self.family {
            Family::AdditiveSeparablePower { alpha, beta } if alpha == beta => Some(2.0 / alpha),
            Family::AdditiveSeparablePower { .. } => None,
            _ => self.degrees.map(|d| d.gamma),
        }
    }

    pub fn family_name(&self) -> &str {
        match &self.family {
            Family::PowerWeighted { .. } => "power_weighted",
            Family::LogTransformedPowerWeighted { .. } => "log_transformed_power_weighted",
            Family::AdditiveSeparablePower { .. } => "additive_separable_power",
            Family::GenericHomothetic(g) => g.name(),
        }
    }

    /// Number of private goods, when fixed by the family.
    pub fn private_dim(&self) -> Option<usize> {
        match &self.family {
            Family::AdditiveSeparablePower { .. } => Some(2),
            Family::GenericHomothetic(g) => Some(g.dims().0),
            _ => None,
        }
    }

    /// Checks that `n` private goods and the given public bundle fit this spec.
    pub fn check_dims(&self, n: usize, z: &PublicBundle) -> Result<()> {
        let (want_n, want_k1, want_k2) = match &self.family {
            Family::PowerWeighted { .. } | Family::LogTransformedPowerWeighted { .. } => {
                (z.z1().len(), z.z1().len(), None)
            }
            Family::AdditiveSeparablePower { .. } => (2, 2, None),
            Family::GenericHomothetic(g) => {
                let (a, b, c) = g.dims();
                (a, b, Some(c))
            }
        };
        if n != want_n {
            return Err(Error::DimensionMismatch { what: "private goods", expected: want_n, found: n });
        }
        if z.z1().len() != want_k1 {
            return Err(Error::DimensionMismatch { what: "z1", expected: want_k1, found: z.z1().len() });
        }
        if let Some(k2) = want_k2 {
            if z.z2().len() != k2 {
                return Err(Error::DimensionMismatch { what: "z2", expected: k2, found: z.z2().len() });
            }
        }
        Ok(())
    }

    /// Underlying function `u(x; z1, z2)` on a raw slice.
    pub fn underlying(&self, x: &[f64], z: &PublicBundle) -> Result<f64> {
        self.check_dims(x.len(), z)?;
        let value = match &self.family {
            Family::PowerWeighted { alpha } | Family::LogTransformedPowerWeighted { alpha } => {
                let mut sum = 0.0;
                for (xn, zn) in x.iter().zip(z.z1()) {
                    if *xn < 0.0 || (*xn == 0.0 && *alpha < 0.0) {
                        return Err(Error::Domain(format!("x = {xn} outside the domain of x^{alpha}")));
                    }
                    sum += xn.powf(*alpha) * zn;
                }
                sum
            }
            Family::AdditiveSeparablePower { alpha, beta } => {
                if x.iter().any(|v| *v < 0.0) {
                    return Err(Error::Domain("negative private quantity".into()));
                }
                (x[0] * x[1]).powf(1.0 / alpha) + (z.z1()[0] * z.z1()[1]).powf(1.0 / beta)
            }
            Family::GenericHomothetic(g) => (g.eval)(x, z.z1(), z.z2()),
        };
        if !value.is_finite() {
            return Err(Error::Domain(format!("underlying function is not finite at x = {x:?}")));
        }
        Ok(value)
    }

    /// Utility `h = g(u(x; z1, z2))` on a raw slice.
    pub fn utility(&self, x: &[f64], z: &PublicBundle) -> Result<f64> {
        self.transform.apply(self.underlying(x, z)?)
    }
}

fn check_alpha(alpha: f64, allow_any: bool) -> Result<()> {
    if !alpha.is_finite() || alpha == 0.0 || alpha == 1.0 {
        return Err(Error::InvalidParameter(format!("alpha must be finite and not 0 or 1, got {alpha}")));
    }
    if !allow_any && !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} lies outside (0, 1); pass the override to allow it"
        )));
    }
    Ok(())
}

/// `u(x; z1, z2)` for a validated bundle.
pub fn evaluate_underlying(spec: &UtilitySpec, x: &PrivateBundle, z: &PublicBundle) -> Result<f64> {
    spec.underlying(x.as_slice(), z)
}

/// `h(x; z1, z2) = g(u(x; z1, z2))` for a validated bundle.
pub fn evaluate_utility(spec: &UtilitySpec, x: &PrivateBundle, z: &PublicBundle) -> Result<f64> {
    spec.utility(x.as_slice(), z)
}

/// JSON form of a built-in [`UtilitySpec`].
///
/// `eta` and `theta` are optional; when present they must equal the degrees
/// implied by the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_any_alpha: bool,
    #[serde(default = "identity_transform")]
    pub transform: Transform,
}

fn identity_transform() -> Transform {
    Transform::Identity
}

impl TryFrom<SpecDocument> for UtilitySpec {
    type Error = Error;

    fn try_from(doc: SpecDocument) -> Result<Self> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::InvalidParameter(format!("family {} requires \"{name}\"", doc.family)))
        };
        let spec = match doc.family.as_str() {
            "power_weighted" => {
                let alpha = need(doc.alpha, "alpha")?;
                check_alpha(alpha, doc.allow_any_alpha)?;
                match doc.transform {
                    Transform::Identity => UtilitySpec::power_weighted_with(alpha, doc.allow_any_alpha)?,
                    Transform::LogPlus { offset } => {
                        UtilitySpec::log_transformed_with(alpha, offset, doc.allow_any_alpha)?
                    }
                }
            }
            "log_transformed_power_weighted" => {
                let alpha = need(doc.alpha, "alpha")?;
                let offset = match doc.transform {
                    Transform::LogPlus { offset } => offset,
                    Transform::Identity => {
                        return Err(Error::InvalidParameter(
                            "log_transformed_power_weighted requires a log_plus transform".into(),
                        ))
                    }
                };
                UtilitySpec::log_transformed_with(alpha, offset, doc.allow_any_alpha)?
            }
            "additive_separable_power" => {
                if !doc.transform.is_identity() {
                    return Err(Error::InvalidParameter(
                        "additive_separable_power supports only the identity transform".into(),
                    ));
                }
                UtilitySpec::additive_separable(need(doc.alpha, "alpha")?, need(doc.beta, "beta")?)?
            }
            other => {
                return Err(Error::InvalidParameter(format!("unknown utility family \"{other}\"")));
            }
        };
        if doc.eta.is_some() || doc.theta.is_some() {
            let implied = spec.degrees().ok_or_else(|| {
                Error::DeclarationRejected(format!("{} has no independent degrees to declare", doc.family))
            })?;
            for (name, declared, actual) in [("eta", doc.eta, implied.eta), ("theta", doc.theta, implied.theta)] {
                if let Some(d) = declared {
                    if (d - actual).abs() > 1e-12 * actual.abs().max(1.0) {
                        return Err(Error::DeclarationRejected(format!(
                            "declared {name} = {d} but the family implies {actual}"
                        )));
                    }
                }
            }
        }
        Ok(spec)
    }
}

impl UtilitySpec {
    /// JSON document for a built-in family; generic specs have none.
    pub fn to_document(&self) -> Option<SpecDocument> {
        let (family, alpha, beta) = match &self.family {
            Family::PowerWeighted { alpha } => ("power_weighted", Some(*alpha), None),
            Family::LogTransformedPowerWeighted { alpha } => ("log_transformed_power_weighted", Some(*alpha), None),
            Family::AdditiveSeparablePower { alpha, beta } => ("additive_separable_power", Some(*alpha), Some(*beta)),
            Family::GenericHomothetic(_) => return None,
        };
        let allow_any_alpha = alpha.is_some_and(|a| !(a > 0.0 && a < 1.0)) && beta.is_none();
        Some(SpecDocument {
            family: family.into(),
            alpha,
            beta,
            eta: self.degrees.map(|d| d.eta),
            theta: self.degrees.map(|d| d.theta),
            allow_any_alpha,
            transform: self.transform,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpecDocument = serde_json::from_str(text)?;
        doc.try_into()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = self
            .to_document()
            .ok_or_else(|| Error::InvalidParameter("generic utilities are not serializable".into()))?;
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(z1: &[f64]) -> PublicBundle {
        PublicBundle::from_z1(z1.to_vec()).unwrap()
    }

    // Second evaluator written directly from the formula text.
    fn example1_by_hand(alpha: f64, x: [f64; 2], z1: [f64; 2]) -> f64 {
        x[0].powf(alpha) * z1[0] + x[1].powf(alpha) * z1[1]
    }

    #[test]
    fn power_weighted_hand_value() {
        let spec = UtilitySpec::power_weighted(0.5).unwrap();
        let u = spec.underlying(&[1.0, 4.0], &z(&[1.0, 4.0])).unwrap();
        assert_eq!(u, 9.0);
        assert_eq!(u, example1_by_hand(0.5, [1.0, 4.0], [1.0, 4.0]));
        assert_eq!(spec.underlying(&[0.0, 0.0], &z(&[1.0, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn additive_separable_hand_value() {
        let spec = UtilitySpec::additive_separable(2.0, 2.0).unwrap();
        assert_eq!(spec.underlying(&[4.0, 9.0], &z(&[1.0, 1.0])).unwrap(), 7.0);
        assert_eq!(spec.joint_degree(), Some(1.0));
        assert!(spec.degrees().is_none());
    }

    #[test]
    fn log_transform_applies_offset() {
        let spec = UtilitySpec::log_transformed(0.5, DEFAULT_LOG_OFFSET).unwrap();
        let h = spec.utility(&[1.0, 4.0], &z(&[1.0, 4.0])).unwrap();
        assert!((h - (9.0f64.ln() + 5.0)).abs() < 1e-14);
        assert!((h - 7.1972).abs() < 1e-4);
        assert!(matches!(spec.utility(&[0.0, 0.0], &z(&[1.0, 1.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn identity_transform_matches_underlying() {
        let spec = UtilitySpec::power_weighted(0.3).unwrap();
        let zb = z(&[2.0, 0.7]);
        let x = [0.4, 3.3];
        assert_eq!(spec.utility(&x, &zb).unwrap(), spec.underlying(&x, &zb).unwrap());
    }

    #[test]
    fn dimension_and_domain_errors() {
        let spec = UtilitySpec::power_weighted(0.5).unwrap();
        assert!(matches!(
            spec.underlying(&[1.0, 2.0, 3.0], &z(&[1.0, 1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        let neg = UtilitySpec::power_weighted_with(-0.5, true).unwrap();
        assert!(matches!(neg.underlying(&[0.0, 1.0], &z(&[1.0, 1.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn alpha_range_enforced_unless_overridden() {
        assert!(UtilitySpec::power_weighted(1.5).is_err());
        assert!(UtilitySpec::power_weighted(0.0).is_err());
        assert!(UtilitySpec::power_weighted_with(1.0, true).is_err());
        assert!(UtilitySpec::power_weighted_with(1.5, true).is_ok());
    }

    #[test]
    fn degrees_identity() {
        let d = HomogeneityDegrees::new(0.5, 1.0).unwrap();
        assert_eq!(d.gamma, 1.5);
        assert_eq!(d.phi, -2.0);
        assert!(HomogeneityDegrees::new(0.0, 1.0).is_err());
    }

    #[test]
    fn bundles_validate() {
        assert!(PrivateBundle::new(vec![]).is_err());
        assert!(PrivateBundle::new(vec![1.0, -0.1]).is_err());
        assert!(PublicBundle::new(vec![0.0], vec![]).is_err());
        assert!(PublicBundle::new(vec![1.0], vec![0.0]).is_ok());
        assert!(PriceIncome::new(vec![1.0], 0.0).is_err());
        assert!(PriceIncome::new(vec![0.0], 1.0).is_err());
        let zb = z(&[1.0, 4.0]).scaled(2.5).unwrap();
        assert_eq!(zb.z1(), &[2.5, 10.0]);
    }

    #[test]
    fn generic_declaration_verified() {
        let cd = |x: &[f64], z1: &[f64], _: &[f64]| (x[0] * x[1]).sqrt() * z1[0] * z1[1];
        let ok = GenericUtility::new("cobb_douglas", (2, 2, 0), 1.0, 2.0, cd).unwrap();
        assert_eq!(ok.degrees().phi, -2.0);
        let bad = GenericUtility::new("cobb_douglas", (2, 2, 0), 1.0, 1.0, cd);
        assert!(matches!(bad, Err(Error::DeclarationRejected(_))));
        let zero_eta = GenericUtility::new("flat", (1, 1, 0), 0.0, 1.0, |_, z1: &[f64], _| z1[0]);
        assert!(zero_eta.is_err());
    }

    #[test]
    fn json_round_trip_and_rejections() {
        let text = r#"{"family":"log_transformed_power_weighted","alpha":0.5,"eta":0.5,"theta":1,
                       "transform":{"kind":"log_plus","offset":5}}"#;
        let spec = UtilitySpec::from_json(text).unwrap();
        assert_eq!(spec.transform(), Transform::LogPlus { offset: 5.0 });
        let back = UtilitySpec::from_json(&spec.to_json().unwrap()).unwrap();
        assert_eq!(back.to_document(), spec.to_document());

        let wrong_eta = r#"{"family":"power_weighted","alpha":0.5,"eta":1.0}"#;
        assert!(matches!(UtilitySpec::from_json(wrong_eta), Err(Error::DeclarationRejected(_))));
        assert!(UtilitySpec::from_json(r#"{"family":"ces","alpha":0.5}"#).is_err());
        assert!(UtilitySpec::from_json(r#"{"family":"power_weighted"}"#).is_err());
    }

    #[test]
    fn power_weighted_is_increasing_in_x_and_z1() {
        let spec = UtilitySpec::power_weighted(0.4).unwrap();
        for i in 0..50 {
            let p = halton_point(i, 4, 0.1, 5.0);
            let zb = z(&[p[2], p[3]]);
            let base = spec.underlying(&p[..2], &zb).unwrap();
            for k in 0..2 {
                let mut x = p[..2].to_vec();
                x[k] *= 1.01;
                assert!(spec.underlying(&x, &zb).unwrap() > base);
                let mut z1 = vec![p[2], p[3]];
                z1[k] *= 1.01;
                assert!(spec.underlying(&p[..2], &z(&z1)).unwrap() > base);
            }
        }
    }
}

//! Compensating variation for a proportional change `z1 -> t z1`.
//!
//! Three routes are provided and cross-checked:
//!
//! - [`cv_closed_form`]: `(t^phi - 1) m` with `phi = -theta / eta`, valid when
//!   the underlying function is independently homogeneous (any monotone
//!   transform).
//! - [`cv_brute_force`]: the definition `e(u, p; t z1, z2) - e(u, p; z1, z2)`
//!   with two numerical expenditure minimizations. Works for any spec.
//! - [`cv_decomposition`]: `sum_n p_n (x'_n - x*_n)` over Hicksian demands.
//!
//! The baseline utility is always recomputed as `v(m, p; z)`.

use serde::Serialize;

use crate::duality::{solve_emp, solve_ump, EmpResult, DEFAULT_UMP_TOL};
use crate::error::{Error, Result};
use crate::utility::{PriceIncome, PublicBundle, UtilitySpec};

#[derive(Debug, Clone, Copy)]
pub struct CvQuery<'a> {
    pub spec: &'a UtilitySpec,
    pub pi: &'a PriceIncome,
    pub z: &'a PublicBundle,
    pub t: f64,
}

impl<'a> CvQuery<'a> {
    pub fn new(spec: &'a UtilitySpec, pi: &'a PriceIncome, z: &'a PublicBundle, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter(format!("provision scaling t must be positive, got {t}")));
        }
        spec.check_dims(pi.prices().len(), z)?;
        Ok(Self { spec, pi, z, t })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub t: f64,
    pub cv_closed_form: f64,
    pub cv_brute_force: f64,
    /// `p_n (x'_n - x*_n)` for each private good.
    pub per_good: Vec<f64>,
    pub phi_used: f64,
    pub baseline_utility: f64,
}

/// Agreement tolerance between CV routes at income `m`.
pub fn cv_tolerance(m: f64) -> f64 {
    1e-3f64.max(1e-4 * m)
}

/// `(t^phi - 1) m`.
pub fn cv_from_phi(phi: f64, t: f64, m: f64) -> f64 {
    if t == 1.0 {
        return 0.0;
    }
    (t.powf(phi) - 1.0) * m
}

/// Exponent implied by a measured CV: `ln(cv / e + 1) / ln t`.
pub fn phi_from_cv(cv: f64, expenditure: f64, t: f64) -> Result<f64> {
    let ratio = cv / expenditure + 1.0;
    if !(ratio > 0.0) || t == 1.0 || !(t > 0.0) {
        return Err(Error::Domain(format!("cannot recover an exponent from cv = {cv}, e = {expenditure}, t = {t}")));
    }
    Ok(ratio.ln() / t.ln())
}

pub fn cv_closed_form(q: &CvQuery<'_>) -> Result<f64> {
    let degrees = q.spec.require_degrees()?;
    if degrees.eta == 0.0 {
        return Err(Error::InvalidParameter("eta = 0 leaves phi undefined".into()));
    }
    Ok(cv_from_phi(degrees.phi, q.t, q.pi.income()))
}

struct BruteForce {
    baseline_utility: f64,
    before: EmpResult,
    after: EmpResult,
}

fn brute_force_solves(q: &CvQuery<'_>, tol: f64) -> Result<BruteForce> {
    let baseline_utility = solve_ump(q.spec, q.pi, q.z, DEFAULT_UMP_TOL.min(tol))?.indirect_utility;
    let prices = q.pi.prices();
    let before = solve_emp(q.spec, baseline_utility, prices, q.z, tol)?;
    let after = solve_emp(q.spec, baseline_utility, prices, &q.z.scaled(q.t)?, tol)?;
    Ok(BruteForce { baseline_utility, before, after })
}

fn per_good(prices: &[f64], run: &BruteForce) -> Vec<f64> {
    prices
        .iter()
        .zip(run.after.demand.as_slice().iter().zip(run.before.demand.as_slice()))
        .map(|(p, (after, before))| p * (after - before))
        .collect()
}

pub fn cv_brute_force(q: &CvQuery<'_>, tol: f64) -> Result<f64> {
    let run = brute_force_solves(q, tol)?;
    Ok(run.after.expenditure - run.before.expenditure)
}

pub fn cv_decomposition(q: &CvQuery<'_>, tol: f64) -> Result<Vec<f64>> {
    let run = brute_force_solves(q, tol)?;
    Ok(per_good(q.pi.prices(), &run))
}

/// All three routes, sharing one set of solves. Specs without declared
/// degrees get `NaN` for the closed form and `phi_used`.
pub fn compensating_variation(q: &CvQuery<'_>, tol: f64) -> Result<CvResult> {
    let run = brute_force_solves(q, tol)?;
    let phi_used = q.spec.degrees().map_or(f64::NAN, |d| d.phi);
    Ok(CvResult {
        t: q.t,
        cv_closed_form: cv_from_phi(phi_used, q.t, q.pi.income()),
        cv_brute_force: run.after.expenditure - run.before.expenditure,
        per_good: per_good(q.pi.prices(), &run),
        phi_used,
        baseline_utility: run.baseline_utility,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    PositiveInfinity,
    NegativeInfinity,
    Finite(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitDiagnostics {
    /// `(t, cv)` on the decreasing sequence toward zero.
    pub toward_zero: Vec<(f64, f64)>,
    pub limit_as_t_to_0: Limit,
    /// `(t, cv)` on the increasing sequence toward infinity.
    pub toward_infinity: Vec<(f64, f64)>,
    pub limit_as_t_to_infinity: Limit,
}

const TOWARD_ZERO: [f64; 3] = [1e-1, 1e-3, 1e-6];
const TOWARD_INFINITY: [f64; 3] = [1e1, 1e3, 1e6];

fn classify(samples: &[(f64, f64)], phi: f64, m: f64, shrinking: bool) -> Limit {
    // t^phi diverges exactly when phi has the sign that makes ln(t) * phi grow.
    let diverges = if shrinking { phi < 0.0 } else { phi > 0.0 };
    if diverges {
        let last = samples.last().map_or(0.0, |s| s.1);
        if last > 0.0 {
            Limit::PositiveInfinity
        } else {
            Limit::NegativeInfinity
        }
    } else if phi == 0.0 {
        Limit::Finite(0.0)
    } else {
        Limit::Finite(-m)
    }
}

/// Behavior of `(t^phi - 1) m` as provision vanishes or grows without bound.
///
/// For `phi < 0` the compensation needed as `t -> 0` grows without bound
/// (positive CV), while the willingness to pay as `t -> infinity` is bounded
/// by income (CV -> -m).
pub fn cv_limit_diagnostics(phi: f64, m: f64) -> LimitDiagnostics {
    let toward_zero: Vec<(f64, f64)> = TOWARD_ZERO.iter().map(|&t| (t, cv_from_phi(phi, t, m))).collect();
    let toward_infinity: Vec<(f64, f64)> = TOWARD_INFINITY.iter().map(|&t| (t, cv_from_phi(phi, t, m))).collect();
    LimitDiagnostics {
        limit_as_t_to_0: classify(&toward_zero, phi, m, true),
        limit_as_t_to_infinity: classify(&toward_infinity, phi, m, false),
        toward_zero,
        toward_infinity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duality::DEFAULT_EMP_TOL;
    use crate::utility::DEFAULT_LOG_OFFSET;

    #[test]
    fn closed_form_reference_values() {
        assert_eq!(cv_from_phi(-1.0, 2.0, 100.0), -50.0);
        assert_eq!(cv_from_phi(-2.0, 2.0, 100.0), -75.0);
        assert_eq!(cv_from_phi(-1.0, 0.5, 100.0), 100.0);
        for phi in [-3.0, -0.5, 0.0, 2.0] {
            assert_eq!(cv_from_phi(phi, 1.0, 100.0), 0.0);
        }
    }

    #[test]
    fn example2_brute_force_and_decomposition() {
        let spec = UtilitySpec::log_transformed(0.5, DEFAULT_LOG_OFFSET).unwrap();
        let pi = PriceIncome::new(vec![1.0, 2.0], 9.0).unwrap();
        let z = PublicBundle::from_z1(vec![1.0, 4.0]).unwrap();
        let q = CvQuery::new(&spec, &pi, &z, 2.0).unwrap();
        let r = compensating_variation(&q, DEFAULT_EMP_TOL).unwrap();
        assert_eq!(r.cv_closed_form, -6.75);
        assert!((r.cv_brute_force + 6.75).abs() < 1e-3);
        assert!((r.per_good[0] + 0.75).abs() < 1e-6, "{:?}", r.per_good);
        assert!((r.per_good[1] + 6.0).abs() < 1e-6, "{:?}", r.per_good);
        assert!((r.per_good.iter().sum::<f64>() - r.cv_closed_form).abs() < 1e-3);
    }

    #[test]
    fn no_change_means_zero_cv() {
        let spec = UtilitySpec::power_weighted(0.4).unwrap();
        let pi = PriceIncome::new(vec![1.0, 2.0], 9.0).unwrap();
        let z = PublicBundle::from_z1(vec![1.0, 4.0]).unwrap();
        let q = CvQuery::new(&spec, &pi, &z, 1.0).unwrap();
        let r = compensating_variation(&q, DEFAULT_EMP_TOL).unwrap();
        assert_eq!(r.cv_closed_form, 0.0);
        assert!(r.cv_brute_force.abs() < 1e-8);
        assert!(r.per_good.iter().all(|c| c.abs() < 1e-8));
    }

    #[test]
    fn single_good_decomposition_equals_cv() {
        let spec = UtilitySpec::power_weighted(0.5).unwrap();
        let pi = PriceIncome::new(vec![2.0], 10.0).unwrap();
        let z = PublicBundle::from_z1(vec![3.0]).unwrap();
        let q = CvQuery::new(&spec, &pi, &z, 2.0).unwrap();
        let r = compensating_variation(&q, DEFAULT_EMP_TOL).unwrap();
        assert_eq!(r.per_good.len(), 1);
        assert!((r.per_good[0] - r.cv_brute_force).abs() < 1e-12);
        assert!((r.cv_brute_force - r.cv_closed_form).abs() < cv_tolerance(10.0));
    }

    #[test]
    fn separable_spec_has_no_closed_form() {
        let spec = UtilitySpec::additive_separable(2.0, 2.0).unwrap();
        let pi = PriceIncome::new(vec![1.0, 1.0], 4.0).unwrap();
        let z = PublicBundle::from_z1(vec![1.0, 1.0]).unwrap();
        let q = CvQuery::new(&spec, &pi, &z, 1.5).unwrap();
        assert!(matches!(cv_closed_form(&q), Err(Error::NotIndependentlyHomogeneous(_))));
        // Brute force still works: u = 3, e(3; 1.5 z) = 2 (3 - 1.5) = 3, so CV = -1.
        assert!((cv_brute_force(&q, DEFAULT_EMP_TOL).unwrap() + 1.0).abs() < 1e-6);
    }

    #[test]
    fn limits() {
        let d = cv_limit_diagnostics(-1.0, 1.0);
        assert_eq!(d.limit_as_t_to_0, Limit::PositiveInfinity);
        assert!((d.toward_zero[2].1 - 999_999.0).abs() < 1e-6);
        assert_eq!(d.limit_as_t_to_infinity, Limit::Finite(-1.0));
        assert!((d.toward_infinity[2].1 + 1.0).abs() < 1e-5);
        assert_eq!(cv_limit_diagnostics(2.0, 3.0).limit_as_t_to_0, Limit::Finite(-3.0));
        assert_eq!(cv_limit_diagnostics(2.0, 3.0).limit_as_t_to_infinity, Limit::PositiveInfinity);
    }

    #[test]
    fn phi_round_trip() {
        let cv = cv_from_phi(-1.7, 3.0, 50.0);
        assert!((phi_from_cv(cv, 50.0, 3.0).unwrap() + 1.7).abs() < 1e-12);
        assert!(phi_from_cv(-60.0, 50.0, 3.0).is_err());
    }

    #[test]
    fn rejects_nonpositive_t() {
        let spec = UtilitySpec::power_weighted(0.4).unwrap();
        let pi = PriceIncome::new(vec![1.0, 2.0], 9.0).unwrap();
        let z = PublicBundle::from_z1(vec![1.0, 4.0]).unwrap();
        assert!(CvQuery::new(&spec, &pi, &z, 0.0).is_err());
        assert!(CvQuery::new(&spec, &pi, &z, -1.0).is_err());
    }
}

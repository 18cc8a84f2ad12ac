//! Utility maximization and expenditure minimization.
//!
//! [`solve_ump`] maximizes `h(x; z)` on the budget hyperplane. [`solve_emp`]
//! inverts the indirect utility in income: `v(m, p; z)` is strictly
//! increasing in `m`, so the minimal expenditure reaching a target utility is
//! found by bisection on `m`, and the Hicksian bundle is the Marshallian
//! bundle at that income.

mod closed_form;
mod simplex;

use serde::Serialize;

pub use closed_form::{
    example1_closed_forms, example2_closed_forms, example3_expenditure, Example1Solution, Example2Solution,
};

use crate::error::{Error, Result};
use crate::numeric::dot;
use crate::utility::{validate_prices, PriceIncome, PrivateBundle, PublicBundle, UtilitySpec};

/// Default share-space tolerance of the UMP search.
pub const DEFAULT_UMP_TOL: f64 = 1e-10;
/// Default relative tolerance of the EMP income bisection.
pub const DEFAULT_EMP_TOL: f64 = 1e-10;
/// Incomes beyond this bound are treated as an unattainable target.
pub const EXPENDITURE_CAP: f64 = 1_152_921_504_606_846_976.0; // 2^60
const INCOME_FLOOR: f64 = 1.0 / EXPENDITURE_CAP;

/// Marshallian demand and indirect utility.
#[derive(Debug, Clone, Serialize)]
pub struct UmpResult {
    pub demand: PrivateBundle,
    pub indirect_utility: f64,
    pub iterations: usize,
    /// `|p . x - m| / m`.
    pub residual: f64,
}

/// Hicksian demand and expenditure.
#[derive(Debug, Clone, Serialize)]
pub struct EmpResult {
    pub demand: PrivateBundle,
    pub expenditure: f64,
    pub target_utility: f64,
    pub iterations: usize,
    /// `|h(x) - target|`.
    pub residual: f64,
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

pub fn solve_ump(spec: &UtilitySpec, pi: &PriceIncome, z: &PublicBundle, tol: f64) -> Result<UmpResult> {
    check_tol(tol)?;
    spec.check_dims(pi.prices().len(), z)?;
    ump_at(spec, pi.prices(), pi.income(), z, tol, None).map(|(r, _)| r)
}

fn ump_at(
    spec: &UtilitySpec,
    prices: &[f64],
    income: f64,
    z: &PublicBundle,
    tol: f64,
    start: Option<&[f64]>,
) -> Result<(UmpResult, Vec<f64>)> {
    let opt = simplex::maximize_on_budget(|x| spec.utility(x, z), prices, income, tol, start)?;
    let residual = (dot(prices, &opt.demand) - income).abs() / income;
    let result = UmpResult {
        demand: PrivateBundle::new(opt.demand)?,
        indirect_utility: opt.value,
        iterations: opt.iterations,
        residual,
    };
    Ok((result, opt.logits))
}

pub fn solve_emp(
    spec: &UtilitySpec,
    target_utility: f64,
    prices: &[f64],
    z: &PublicBundle,
    tol: f64,
) -> Result<EmpResult> {
    check_tol(tol)?;
    validate_prices(prices)?;
    spec.check_dims(prices.len(), z)?;
    if !target_utility.is_finite() {
        return Err(Error::InvalidParameter(format!("target utility must be finite, got {target_utility}")));
    }
    let objective = |x: &[f64]| spec.utility(x, z);
    let floor = |x: &[f64]| spec.utility(x, z).ok();
    let out = minimize_expenditure(objective, floor, target_utility, prices, tol)?;
    Ok(EmpResult {
        residual: (out.value - target_utility).abs(),
        demand: PrivateBundle::new(out.demand)?,
        expenditure: out.expenditure,
        target_utility,
        iterations: out.iterations,
    })
}

pub(crate) struct ExpenditureOptimum {
    pub demand: Vec<f64>,
    pub expenditure: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Smallest income at which the budget-constrained maximum of `objective`
/// reaches `target`, by bisection on income.
///
/// `floor` evaluates the objective at the zero bundle when it is defined;
/// targets at or below it cost nothing.
pub(crate) fn minimize_expenditure<F, G>(
    objective: F,
    floor: G,
    target: f64,
    prices: &[f64],
    tol: f64,
) -> Result<ExpenditureOptimum>
where
    F: Fn(&[f64]) -> Result<f64>,
    G: Fn(&[f64]) -> Option<f64>,
{
    let zero = vec![0.0; prices.len()];
    if let Some(v0) = floor(&zero) {
        if target <= v0 {
            return Ok(ExpenditureOptimum { demand: zero, expenditure: 0.0, value: v0, iterations: 0 });
        }
    }

    let mut iterations = 0usize;
    let mut warm: Option<Vec<f64>> = None;
    let mut solve = |m: f64, warm: &mut Option<Vec<f64>>| -> Result<simplex::BudgetOptimum> {
        let opt = simplex::maximize_on_budget(&objective, prices, m, DEFAULT_UMP_TOL.min(tol), warm.as_deref())?;
        iterations += opt.iterations;
        *warm = Some(opt.logits.clone());
        Ok(opt)
    };

    let mut m = 1.0;
    let (mut lo, mut hi);
    if solve(m, &mut warm)?.value >= target {
        hi = m;
        loop {
            m *= 0.5;
            if m < INCOME_FLOOR {
                return Err(Error::Domain(format!(
                    "target utility {target} is reached at every income down to {INCOME_FLOOR:e}"
                )));
            }
            if solve(m, &mut warm)?.value < target {
                lo = m;
                break;
            }
            hi = m;
        }
    } else {
        lo = m;
        loop {
            m *= 2.0;
            if m > EXPENDITURE_CAP {
                return Err(Error::Unattainable { target, cap: EXPENDITURE_CAP });
            }
            if solve(m, &mut warm)?.value >= target {
                hi = m;
                break;
            }
            lo = m;
        }
    }

    let rel_tol = tol.max(4.0 * f64::EPSILON);
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if solve(mid, &mut warm)?.value >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let income = 0.5 * (lo + hi);
    let opt = solve(income, &mut warm)?;
    Ok(ExpenditureOptimum {
        expenditure: dot(prices, &opt.demand),
        demand: opt.demand,
        value: opt.value,
        iterations,
    })
}

/// Maximizes an arbitrary objective on a budget; used for sub-utilities
/// that are not full [`UtilitySpec`]s.
pub(crate) fn maximize_objective<F>(objective: F, prices: &[f64], income: f64, tol: f64) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let opt = simplex::maximize_on_budget(objective, prices, income, tol, None)?;
    Ok((opt.demand, opt.value))
}

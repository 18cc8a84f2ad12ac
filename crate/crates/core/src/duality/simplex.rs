//! Maximization over a budget hyperplane.
//!
//! Bundles on `p . x = m` are parameterized by expenditure shares
//! `s = softmax(y, 0)` with `N - 1` free logits `y`, so `x_n = s_n m / p_n`
//! stays strictly interior for every finite `y`. The objective is maximized
//! with a Nelder-Mead search started from equal shares, then each logit is
//! polished by locating the root of a five-point derivative estimate.

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 20_000;
const INITIAL_STEP: f64 = 0.5;
const FLAT_DIAMETER: f64 = 1e-3;
const POLISH_STEP: f64 = 1e-3;
const POLISH_SWEEPS: usize = 40;
const POLISH_ROOT_ITERS: usize = 60;
const MAX_LOGIT: f64 = 700.0;

#[derive(Debug, Clone)]
pub(crate) struct BudgetOptimum {
    pub demand: Vec<f64>,
    pub value: f64,
    pub logits: Vec<f64>,
    pub iterations: usize,
}

pub(crate) fn bundle_from_logits(logits: &[f64], prices: &[f64], income: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(0.0f64, f64::max);
    let weights: Vec<f64> = logits.iter().map(|y| (y - max).exp()).chain(std::iter::once((-max).exp())).collect();
    let total: f64 = weights.iter().sum();
    weights
        .iter()
        .zip(prices)
        .map(|(w, p)| w / total * income / p)
        .collect()
}

/// Maximizes `objective` over `{x > 0 : prices . x = income}`.
///
/// `start` warm-starts the search at the given logits; equal shares otherwise.
pub(crate) fn maximize_on_budget<F>(
    objective: F,
    prices: &[f64],
    income: f64,
    tol: f64,
    start: Option<&[f64]>,
) -> Result<BudgetOptimum>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let n = prices.len();
    if n == 1 {
        let demand = vec![income / prices[0]];
        let value = objective(&demand)?;
        return Ok(BudgetOptimum { demand, value, logits: Vec::new(), iterations: 0 });
    }
    let dim = n - 1;
    // Minimize the negated objective in logit space.
    let cost = |y: &[f64]| -> Result<f64> {
        if y.iter().any(|v| !v.is_finite() || v.abs() > MAX_LOGIT) {
            return Ok(f64::INFINITY);
        }
        let v = objective(&bundle_from_logits(y, prices, income))?;
        Ok(if v.is_nan() { f64::INFINITY } else { -v })
    };

    let x0 = match start {
        Some(s) if s.len() == dim => s.to_vec(),
        _ => vec![0.0; dim],
    };
    let f0 = cost(&x0)?;
    let (mut best, mut iterations, flat) = nelder_mead(&cost, &x0, tol)?;
    // A plateau is fine once the search has moved off equal shares, or when a
    // warm start already sits on it; at the cold start it means no optimum.
    if flat && start.is_none() && !(best.1 < f0) {
        return Err(Error::NonConvergence { iterations, best: best.0 });
    }
    if !flat {
        // One restart from the best vertex guards against premature collapse.
        let (restarted, more, _) = nelder_mead(&cost, &best.0, tol)?;
        iterations += more;
        if restarted.1 <= best.1 {
            best = restarted;
        }
    }
    let (logits, polish_evals) = polish(&cost, best.0, best.1)?;
    iterations += polish_evals;
    let demand = bundle_from_logits(&logits, prices, income);
    let value = objective(&demand)?;
    Ok(BudgetOptimum { demand, value, logits, iterations })
}

type Vertex = (Vec<f64>, f64);

/// Returns the best vertex, the iteration count, and whether the search
/// stopped on a simplex whose values agree to machine precision.
fn nelder_mead<C>(cost: &C, x0: &[f64], tol: f64) -> Result<(Vertex, usize, bool)>
where
    C: Fn(&[f64]) -> Result<f64>,
{
    let dim = x0.len();
    let mut simplex: Vec<Vertex> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), cost(x0)?));
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += INITIAL_STEP;
        let f = cost(&v)?;
        simplex.push((v, f));
    }

    for iter in 0..MAX_ITERATIONS {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter <= tol {
            return Ok((simplex.swap_remove(0), iter, false));
        }
        let spread = simplex[dim].1 - simplex[0].1;
        if spread == 0.0 && diameter > FLAT_DIAMETER && simplex[0].1.is_finite() {
            return Ok((simplex.swap_remove(0), iter, true));
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(v, _)| v[j]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let along = |coef: f64| -> Vec<f64> {
            centroid.iter().zip(&worst.0).map(|(c, w)| c + coef * (c - w)).collect()
        };

        let reflected = along(1.0);
        let f_r = cost(&reflected)?;
        if f_r < simplex[0].1 {
            let expanded = along(2.0);
            let f_e = cost(&expanded)?;
            simplex[dim] = if f_e < f_r { (expanded, f_e) } else { (reflected, f_r) };
            continue;
        }
        if f_r < simplex[dim - 1].1 {
            simplex[dim] = (reflected, f_r);
            continue;
        }
        let (contracted, f_c) = if f_r < worst.1 {
            let c = along(0.5);
            let f = cost(&c)?;
            (c, f)
        } else {
            let c = along(-0.5);
            let f = cost(&c)?;
            (c, f)
        };
        if f_c < worst.1.min(f_r) {
            simplex[dim] = (contracted, f_c);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let v: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
            let f = cost(&v)?;
            *vertex = (v, f);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Err(Error::NonConvergence { iterations: MAX_ITERATIONS, best: simplex[0].0.clone() })
}

/// Coordinate-wise refinement: drive each partial derivative of `cost` to zero.
///
/// Function-value comparisons resolve the optimum only to about the square
/// root of machine precision; a derivative root is located far more tightly.
fn polish<C>(cost: &C, mut y: Vec<f64>, mut f_y: f64) -> Result<(Vec<f64>, usize)>
where
    C: Fn(&[f64]) -> Result<f64>,
{
    let mut evals = 0usize;
    for _ in 0..POLISH_SWEEPS {
        let mut largest_move = 0.0f64;
        for i in 0..y.len() {
            let mut deriv = |s: f64| -> Result<f64> {
                let mut p = y.clone();
                let h = POLISH_STEP;
                let mut at = |d: f64| {
                    p[i] = s + d;
                    cost(&p)
                };
                let (f2, f1, m1, m2) = (at(2.0 * h)?, at(h)?, at(-h)?, at(-2.0 * h)?);
                evals += 4;
                Ok((-f2 + 8.0 * f1 - 8.0 * m1 + m2) / (12.0 * h))
            };
            let Some(root) = derivative_root(&mut deriv, y[i])? else {
                continue;
            };
            let mut candidate = y.clone();
            candidate[i] = root;
            let f_c = cost(&candidate)?;
            evals += 1;
            if f_c <= f_y + 8.0 * f64::EPSILON * f_y.abs() {
                largest_move = largest_move.max((root - y[i]).abs());
                y = candidate;
                f_y = f_y.min(f_c);
            }
        }
        if largest_move < 1e-13 {
            break;
        }
    }
    Ok((y, evals))
}

/// Root of a (numerically) increasing derivative near `y0`, by bracketing
/// and Illinois false position. `None` if no sign change is found nearby.
fn derivative_root<D>(deriv: &mut D, y0: f64) -> Result<Option<f64>>
where
    D: FnMut(f64) -> Result<f64>,
{
    let d0 = deriv(y0)?;
    if !d0.is_finite() {
        return Ok(None);
    }
    if d0 == 0.0 {
        return Ok(Some(y0));
    }
    // cost decreases toward the root: move against the derivative's sign.
    let dir = -d0.signum();
    let mut step = 1e-6;
    let (mut a, mut fa) = (y0, d0);
    let (mut b, mut fb);
    loop {
        b = y0 + dir * step;
        fb = deriv(b)?;
        if !fb.is_finite() {
            return Ok(None);
        }
        if fb.signum() != fa.signum() {
            break;
        }
        a = b;
        fa = fb;
        step *= 4.0;
        if step > 1.0 {
            return Ok(None);
        }
    }
    let mut side = 0i8;
    for _ in 0..POLISH_ROOT_ITERS {
        let c = (a * fb - b * fa) / (fb - fa);
        if (b - a).abs() <= 1e-15 * (1.0 + c.abs()) {
            return Ok(Some(c));
        }
        let fc = deriv(c)?;
        if fc == 0.0 {
            return Ok(Some(c));
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(Some((a * fb - b * fa) / (fb - fa)))
}

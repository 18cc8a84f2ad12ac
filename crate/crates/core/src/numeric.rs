//! Small numerical helpers shared by the solvers and property checks.

use crate::error::{Error, Result};

/// Relative step used by [`finite_difference_gradient`] when none is given.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Central-difference gradient of `f` at `point`.
///
/// Coordinate `i` is perturbed by `step * max(1, |point[i]|)`. Any non-finite
/// evaluation inside the stencil is reported as a domain violation.
pub fn finite_difference_gradient<F>(f: F, point: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let mut probe = point.to_vec();
    let mut grad = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let h = step * point[i].abs().max(1.0);
        probe[i] = point[i] + h;
        let up = f(&probe)?;
        probe[i] = point[i] - h;
        let down = f(&probe)?;
        probe[i] = point[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite value in finite-difference stencil at coordinate {i}"
            )));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in `base` (van der Corput), in `[0, 1)`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base as u64) as f64 * inv;
        index /= base as u64;
        inv /= b;
    }
    out
}

/// Point `index` of the Halton sequence in `dim` dimensions, mapped onto `[lo, hi]`.
///
/// Index 0 is skipped so the first point is not the lower corner.
pub fn halton_point(index: u64, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton_point supports at most 16 dimensions");
    (0..dim)
        .map(|d| lo + (hi - lo) * radical_inverse(index + 1, PRIMES[d]))
        .collect()
}

/// `n` geometrically spaced values from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

/// Least-squares line through `(xs, ys)`, returned as `(intercept, slope)`.
pub(crate) fn fit_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let slope = sxy / sxx;
    Some((mean_y - slope * mean_x, slope))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn rel_diff(measured: f64, expected: f64) -> f64 {
    let scale = expected.abs().max(f64::MIN_POSITIVE);
    (measured - expected).abs() / scale
}

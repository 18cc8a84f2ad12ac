//! Recovering the sufficient statistic `phi` from provision-change data.
//!
//! Under independent homogeneity, `ln(m~ / m) = phi ln t` and, good by good,
//! `ln(x'_n / x*_n) = phi ln t`. Regressing either log change on `ln t`
//! with an intercept estimates `phi` as the slope.
//!
//! [`generate_panel`] produces synthetic observations from numerical
//! expenditure minimization, [`build_sample`] forms the log changes,
//! [`ols_fit`] fits the line and [`recover_phi`] chains the three.
//! Regressions for different goods are run separately; pooling them is left
//! to the caller.

mod ols;
mod panel;

pub use ols::{ols_fit, EstimationResult, Mode, RegressionSample};
pub use panel::{
    format_significant, generate_panel, read_panel_csv, write_panel_csv, Panel, ProvisionObservation,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::geometric_grid;
use crate::utility::{PriceIncome, PublicBundle, UtilitySpec};

/// Agreement threshold for noiseless panels.
pub const NOISELESS_AGREEMENT_TOL: f64 = 1e-5;

/// `n` provision scalings spread geometrically over `[1/4, 4]`.
pub fn default_t_values(n: usize) -> Vec<f64> {
    geometric_grid(0.25, 4.0, n)
}

/// Euclidean-norm ratio `|z~1| / |z1|`; equals `t` for proportional changes.
pub fn provision_ratio(before: &[f64], after: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    norm(after) / norm(before)
}

pub fn build_sample(panel: &Panel, mode: Mode) -> Result<RegressionSample> {
    let mut y = Vec::with_capacity(panel.len());
    let mut x1 = Vec::with_capacity(panel.len());
    for (i, r) in panel.rows.iter().enumerate() {
        let (after, before) = match mode {
            Mode::Income => (r.m_after, r.m_before),
            Mode::Good(n) => {
                if n == 0 || n > panel.n_goods {
                    return Err(Error::InvalidParameter(format!(
                        "good index {n} outside 1..={}",
                        panel.n_goods
                    )));
                }
                match (&r.x_after, &r.x_before) {
                    (Some(a), Some(b)) => (a[n - 1], b[n - 1]),
                    _ => return Err(Error::InvalidParameter(format!("row {i} has no bundles for good mode"))),
                }
            }
        };
        if !(after > 0.0) || !(before > 0.0) || !(r.t > 0.0) {
            return Err(Error::Domain(format!("row {i}: log change needs positive values")));
        }
        y.push((after / before).ln());
        x1.push(r.t.ln());
    }
    RegressionSample::new(y, x1, mode)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiRecovery {
    pub mode: Mode,
    pub phi_hat: f64,
    pub phi_declared: Option<f64>,
    /// Whether `phi_hat` matches the declared value: within three standard
    /// errors for noisy panels, within [`NOISELESS_AGREEMENT_TOL`] otherwise.
    /// Always false without a declaration.
    pub agreement: bool,
    pub estimation: EstimationResult,
}

pub fn agreement(phi_hat: f64, phi_declared: Option<f64>, stderr: f64, noisy: bool) -> bool {
    let Some(phi) = phi_declared else { return false };
    let tol = if noisy { 3.0 * stderr } else { NOISELESS_AGREEMENT_TOL };
    (phi_hat - phi).abs() < tol
}

pub fn recover_phi(
    spec: &UtilitySpec,
    base: &PriceIncome,
    z: &PublicBundle,
    t_values: &[f64],
    noise_sd: f64,
    seed: u64,
    mode: Mode,
) -> Result<PhiRecovery> {
    let panel = generate_panel(spec, base, z, t_values, noise_sd, seed)?;
    recover_from_panel(&panel, spec.degrees().map(|d| d.phi), noise_sd > 0.0, mode)
}

pub fn recover_from_panel(panel: &Panel, phi_declared: Option<f64>, noisy: bool, mode: Mode) -> Result<PhiRecovery> {
    let estimation = ols_fit(&build_sample(panel, mode)?)?;
    Ok(PhiRecovery {
        mode,
        phi_hat: estimation.beta1,
        phi_declared,
        agreement: agreement(estimation.beta1, phi_declared, estimation.stderr_beta1, noisy),
        estimation,
    })
}

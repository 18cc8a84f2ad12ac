use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which log change is regressed on `ln t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `ln(m_after / m_before)`.
    Income,
    /// `ln(x_after_n / x_before_n)`, with `n` counted from 1.
    Good(usize),
}

impl std::str::FromStr for Mode {
    type Err = Error;

    /// Accepts `income`, `good(n)` or `good:n`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("income") {
            return Ok(Mode::Income);
        }
        let idx = s
            .strip_prefix("good(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| s.strip_prefix("good:"))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown mode '{s}', expected income or good(n)")))?;
        match idx.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Mode::Good(n)),
            _ => Err(Error::InvalidParameter(format!("good index must be a positive integer, got '{idx}'"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Income => f.write_str("income"),
            Mode::Good(n) => write!(f, "good({n})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionSample {
    pub y: Vec<f64>,
    pub x1: Vec<f64>,
    pub mode: Mode,
}

impl RegressionSample {
    pub fn new(y: Vec<f64>, x1: Vec<f64>, mode: Mode) -> Result<Self> {
        if y.len() != x1.len() {
            return Err(Error::DimensionMismatch { what: "regression sample", expected: x1.len(), found: y.len() });
        }
        if y.len() < 3 {
            return Err(Error::Degenerate(format!("regression needs at least 3 observations, got {}", y.len())));
        }
        if let Some(v) = y.iter().chain(&x1).find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite regression value {v}")));
        }
        if x1.iter().all(|x| *x == x1[0]) {
            return Err(Error::Degenerate("X1 has no variation; the slope is not identified".into()));
        }
        Ok(Self { y, x1, mode })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    pub beta0: f64,
    pub beta1: f64,
    pub stderr_beta1: f64,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
}

impl EstimationResult {
    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |a, r| a.max(r.abs()))
    }
}

/// Two-variable least squares with intercept; homoskedastic slope standard error.
pub fn ols_fit(sample: &RegressionSample) -> Result<EstimationResult> {
    let n = sample.len();
    if n < 3 {
        return Err(Error::Degenerate(format!("regression needs at least 3 observations, got {n}")));
    }
    let nf = n as f64;
    let mean_x = sample.x1.iter().sum::<f64>() / nf;
    let mean_y = sample.y.iter().sum::<f64>() / nf;
    let sxx: f64 = sample.x1.iter().map(|x| (x - mean_x).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("X1 has zero variance".into()));
    }
    let sxy: f64 = sample.x1.iter().zip(&sample.y).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let beta1 = sxy / sxx;
    let beta0 = mean_y - beta1 * mean_x;
    let residuals: Vec<f64> = sample.x1.iter().zip(&sample.y).map(|(x, y)| y - beta0 - beta1 * x).collect();
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let sst: f64 = sample.y.iter().map(|y| (y - mean_y).powi(2)).sum();
    let r_squared = if sst > 0.0 { (1.0 - ssr / sst).clamp(0.0, 1.0) } else { 1.0 };
    let stderr_beta1 = (ssr / (nf - 2.0) / sxx).sqrt();
    Ok(EstimationResult { beta0, beta1, stderr_beta1, residuals, r_squared })
}

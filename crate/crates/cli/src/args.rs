use std::path::PathBuf;

use clap::{Args, ValueEnum};

use cvkit::utility::{PriceIncome, PublicBundle, UtilitySpec};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write to this file (atomically) instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A utility spec file plus the economy it is evaluated at. Presence is
/// checked in [`EconomyArgs::load`] so commands can make the group optional.
#[derive(Debug, Args)]
pub struct EconomyArgs {
    /// Utility spec JSON file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Prices, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<f64>,
    /// Income.
    #[arg(long, allow_negative_numbers = true)]
    pub m: Option<f64>,
    /// Public goods subject to scaling, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub z1: Vec<f64>,
    /// Auxiliary public goods, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub z2: Vec<f64>,
}

pub struct Economy {
    pub spec: UtilitySpec,
    pub pi: PriceIncome,
    pub z: PublicBundle,
}

impl EconomyArgs {
    pub fn is_empty(&self) -> bool {
        self.spec.is_none() && self.p.is_empty() && self.m.is_none() && self.z1.is_empty() && self.z2.is_empty()
    }

    pub fn load(&self) -> Result<Economy, Failure> {
        let path = self.spec.as_ref().ok_or_else(|| Failure::usage("--spec is required"))?;
        let m = self.m.ok_or_else(|| Failure::usage("--m is required"))?;
        if self.p.is_empty() || self.z1.is_empty() {
            return Err(Failure::usage("--p and --z1 are required"));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read spec {}: {e}", path.display())))?;
        let spec = UtilitySpec::from_json(&text)
            .map_err(|e| Failure::usage(format!("invalid spec {}: {e}", path.display())))?;
        let pi = PriceIncome::new(self.p.clone(), m).map_err(usage)?;
        let z = PublicBundle::new(self.z1.clone(), self.z2.clone()).map_err(usage)?;
        spec.check_dims(pi.prices().len(), &z).map_err(usage)?;
        Ok(Economy { spec, pi, z })
    }
}

fn usage(e: cvkit::Error) -> Failure {
    Failure::usage(e.to_string())
}

pub fn positive(name: &str, v: f64) -> Result<f64, Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::usage(format!("--{name} must be positive, got {v}")))
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub economy: EconomyArgs,
    /// Target utility for the expenditure problem; defaults to v(m, p; z).
    #[arg(long, allow_negative_numbers = true)]
    pub u: Option<f64>,
    /// Solver tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub economy: EconomyArgs,
    /// Property ids to run (e.g. T1,C3,P4); all applicable checks by default.
    #[arg(long)]
    pub checks: Option<String>,
    /// Relative tolerance of each check.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Scaling factors probed by each check.
    #[arg(long, value_delimiter = ',', default_values_t = cvkit::homogeneity::DEFAULT_T_GRID)]
    pub grid: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub economy: EconomyArgs,
    /// Sufficient statistic -theta/eta, for the closed form without a spec.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "spec")]
    pub phi: Option<f64>,
    /// Provision scaling factors, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub t: Vec<f64>,
    /// Expenditure solver tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Where a panel's provision scalings come from.
#[derive(Debug, Args)]
pub struct PanelSource {
    #[command(flatten)]
    pub economy: EconomyArgs,
    /// Explicit provision scalings, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "n")]
    pub t: Vec<f64>,
    /// Number of scalings spread geometrically over [1/4, 4].
    #[arg(long)]
    pub n: Option<usize>,
    /// Standard deviation of the multiplicative log-normal noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Seed of the noise generator.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl PanelSource {
    pub fn t_values(&self) -> Vec<f64> {
        if self.t.is_empty() {
            cvkit::estimate::default_t_values(self.n.unwrap_or(8))
        } else {
            self.t.clone()
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Read observations from a panel CSV instead of generating them.
    #[arg(long)]
    pub panel: Option<PathBuf>,
    /// Declared phi to compare against when reading a panel file.
    #[arg(long, allow_negative_numbers = true, requires = "panel")]
    pub phi: Option<f64>,
    /// Whether the panel file carries noise (selects the agreement rule).
    #[arg(long, requires = "panel")]
    pub noisy: bool,
    #[command(flatten)]
    pub source: PanelSource,
    /// Regression: income, good(n) (1-based) or all.
    #[arg(long, default_value = "income")]
    pub mode: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PanelArgs {
    #[command(flatten)]
    pub source: PanelSource,
    #[command(flatten)]
    pub output: OutputArgs,
}

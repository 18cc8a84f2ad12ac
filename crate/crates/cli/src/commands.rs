use serde::Serialize;

use cvkit::duality::{
    example1_closed_forms, example2_closed_forms, example3_expenditure, solve_emp, solve_ump, EmpResult, UmpResult,
};
use cvkit::estimate::{
    generate_panel, read_panel_csv, recover_from_panel, write_panel_csv, Mode, Panel, PhiRecovery,
};
use cvkit::homogeneity::{run_suite, PropertyId, SuiteEntry};
use cvkit::utility::{Family, PriceIncome, PublicBundle, Transform, UtilitySpec};
use cvkit::welfare::{compensating_variation, cv_from_phi, phi_from_cv, CvQuery};

use crate::args::{positive, CvArgs, EstimateArgs, EvalArgs, Format, PanelArgs, PanelSource, VerifyArgs};
use crate::output::{self, num, opt};
use crate::Failure;

/// Declared and measured phi further apart than this draw a warning.
const PHI_WARN_GAP: f64 = 1e-3;

#[derive(Debug, Serialize)]
struct ClosedForm {
    demand: Option<Vec<f64>>,
    indirect_utility: Option<f64>,
    expenditure: Option<f64>,
    hicksian: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    family: String,
    transform: Transform,
    prices: Vec<f64>,
    income: f64,
    z1: Vec<f64>,
    z2: Vec<f64>,
    ump: UmpResult,
    emp: EmpResult,
    closed_form: Option<ClosedForm>,
    max_rel_gap: Option<f64>,
}

fn pair(v: &[f64]) -> Option<[f64; 2]> {
    v.try_into().ok()
}

fn closed_form(spec: &UtilitySpec, pi: &PriceIncome, z: &PublicBundle, u: f64) -> Option<ClosedForm> {
    let prices = pair(pi.prices())?;
    let z1 = pair(z.z1())?;
    let m = pi.income();
    match (spec.family(), spec.transform()) {
        (Family::PowerWeighted { alpha }, Transform::Identity) => {
            let s = example1_closed_forms(*alpha, prices, m, z1).ok()?;
            let hicksian = if u > 0.0 {
                example2_closed_forms(*alpha, prices, z1, u.ln(), 0.0).ok().map(|h| h.hicksian.to_vec())
            } else {
                None
            };
            Some(ClosedForm {
                demand: Some(s.demand.to_vec()),
                indirect_utility: Some(s.indirect_utility),
                expenditure: s.expenditure_at(u).ok(),
                hicksian,
            })
        }
        (Family::LogTransformedPowerWeighted { alpha }, Transform::LogPlus { offset }) => {
            let s = example1_closed_forms(*alpha, prices, m, z1).ok()?;
            let h = example2_closed_forms(*alpha, prices, z1, u, offset).ok();
            Some(ClosedForm {
                demand: Some(s.demand.to_vec()),
                indirect_utility: Some(s.indirect_utility.ln() + offset),
                expenditure: h.map(|h| h.expenditure),
                hicksian: h.map(|h| h.hicksian.to_vec()),
            })
        }
        (Family::AdditiveSeparablePower { alpha, beta }, Transform::Identity) => {
            let demand = [m / (2.0 * prices[0]), m / (2.0 * prices[1])];
            let v = (demand[0] * demand[1]).powf(1.0 / alpha) + (z1[0] * z1[1]).powf(1.0 / beta);
            let expenditure = if alpha == beta { example3_expenditure(*alpha, prices, z1, u).ok() } else { None };
            Some(ClosedForm { demand: Some(demand.to_vec()), indirect_utility: Some(v), expenditure, hicksian: None })
        }
        _ => None,
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn max_gap(report: &EvalReport) -> Option<f64> {
    let cf = report.closed_form.as_ref()?;
    let mut gaps = Vec::new();
    if let Some(d) = &cf.demand {
        gaps.extend(report.ump.demand.as_slice().iter().zip(d).map(|(a, b)| rel_gap(*a, *b)));
    }
    if let Some(v) = cf.indirect_utility {
        gaps.push(rel_gap(report.ump.indirect_utility, v));
    }
    if let Some(e) = cf.expenditure {
        gaps.push(if e == 0.0 { report.emp.expenditure.abs() } else { rel_gap(report.emp.expenditure, e) });
    }
    if let Some(h) = &cf.hicksian {
        gaps.extend(report.emp.demand.as_slice().iter().zip(h).map(|(a, b)| rel_gap(*a, *b)));
    }
    gaps.into_iter().reduce(f64::max)
}

fn format_of(out: &crate::args::OutputArgs, default: Format) -> Format {
    out.format.unwrap_or(default)
}

pub fn eval(a: &EvalArgs) -> Result<(), Failure> {
    let tol = positive("tol", a.tol)?;
    let econ = a.economy.load()?;
    let ump = solve_ump(&econ.spec, &econ.pi, &econ.z, tol)?;
    let u = a.u.unwrap_or(ump.indirect_utility);
    let emp = solve_emp(&econ.spec, u, econ.pi.prices(), &econ.z, tol)?;
    let mut report = EvalReport {
        family: econ.spec.family_name().to_string(),
        transform: econ.spec.transform(),
        prices: econ.pi.prices().to_vec(),
        income: econ.pi.income(),
        z1: econ.z.z1().to_vec(),
        z2: econ.z.z2().to_vec(),
        closed_form: closed_form(&econ.spec, &econ.pi, &econ.z, u),
        ump,
        emp,
        max_rel_gap: None,
    };
    report.max_rel_gap = max_gap(&report);

    let content = match format_of(&a.output, Format::Json) {
        Format::Json => output::json(&report)?,
        Format::Csv => {
            let cf = report.closed_form.as_ref();
            let mut rows = Vec::new();
            let mut push = |name: String, numerical: f64, closed: Option<f64>| {
                rows.push(vec![name, num(numerical), opt(closed)]);
            };
            for (i, x) in report.ump.demand.as_slice().iter().enumerate() {
                push(format!("demand_{}", i + 1), *x, cf.and_then(|c| c.demand.as_ref()).map(|d| d[i]));
            }
            push("indirect_utility".into(), report.ump.indirect_utility, cf.and_then(|c| c.indirect_utility));
            push("expenditure".into(), report.emp.expenditure, cf.and_then(|c| c.expenditure));
            for (i, x) in report.emp.demand.as_slice().iter().enumerate() {
                push(format!("hicksian_{}", i + 1), *x, cf.and_then(|c| c.hicksian.as_ref()).map(|h| h[i]));
            }
            output::csv(&["quantity".into(), "numerical".into(), "closed_form".into()], &rows)
        }
    };
    output::emit(a.output.out.as_deref(), &content)
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    family: String,
    tolerance: f64,
    grid: Vec<f64>,
    all_as_expected: bool,
    checks: Vec<SuiteEntry>,
}

fn parse_checks(list: &str) -> Result<Vec<PropertyId>, Failure> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| PropertyId::parse(s).ok_or_else(|| Failure::usage(format!("unknown check '{s}'"))))
        .collect()
}

pub fn verify(a: &VerifyArgs) -> Result<(), Failure> {
    let tol = positive("tol", a.tol)?;
    let ids = a.checks.as_deref().map(parse_checks).transpose()?;
    if ids.as_ref().is_some_and(Vec::is_empty) {
        return Err(Failure::usage("--checks lists no checks"));
    }
    let econ = a.economy.load()?;
    let checks = run_suite(&econ.spec, &econ.pi, &econ.z, ids.as_deref(), &a.grid, tol)?;
    let report = VerifyReport {
        family: econ.spec.family_name().to_string(),
        tolerance: tol,
        grid: a.grid.clone(),
        all_as_expected: checks.iter().all(SuiteEntry::as_expected),
        checks,
    };
    let content = match format_of(&a.output, Format::Json) {
        Format::Json => output::json(&report)?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = report
                .checks
                .iter()
                .map(|c| {
                    vec![
                        c.report.property_id.as_str().to_string(),
                        c.expected_pass.to_string(),
                        c.report.passed.to_string(),
                        num(c.report.worst_violation),
                        num(c.report.tolerance),
                    ]
                })
                .collect();
            let header = ["property_id", "expected_pass", "passed", "worst_violation", "tolerance"].map(String::from);
            output::csv(&header, &rows)
        }
    };
    output::emit(a.output.out.as_deref(), &content)?;
    if report.all_as_expected {
        Ok(())
    } else {
        let odd: Vec<&str> =
            report.checks.iter().filter(|c| !c.as_expected()).map(|c| c.report.property_id.as_str()).collect();
        Err(Failure::numerical(format!("checks did not come out as expected: {}", odd.join(", "))))
    }
}

#[derive(Debug, Serialize)]
struct CvRow {
    t: f64,
    cv_closed_form: Option<f64>,
    cv_brute_force: Option<f64>,
    per_good: Option<Vec<f64>>,
    phi_measured: Option<f64>,
    baseline_utility: Option<f64>,
}

#[derive(Debug, Serialize)]
struct CvReport {
    family: Option<String>,
    phi_declared: Option<f64>,
    income: f64,
    rows: Vec<CvRow>,
}

pub fn cv(a: &CvArgs) -> Result<(), Failure> {
    for &t in &a.t {
        positive("t", t)?;
    }
    let report = match a.phi {
        Some(phi) => {
            let m = positive("m", a.economy.m.ok_or_else(|| Failure::usage("--m is required"))?)?;
            CvReport {
                family: None,
                phi_declared: Some(phi),
                income: m,
                rows: a
                    .t
                    .iter()
                    .map(|&t| CvRow {
                        t,
                        cv_closed_form: Some(cv_from_phi(phi, t, m)),
                        cv_brute_force: None,
                        per_good: None,
                        phi_measured: None,
                        baseline_utility: None,
                    })
                    .collect(),
            }
        }
        None => {
            if a.economy.spec.is_none() {
                return Err(Failure::usage("cv needs either --spec or --phi"));
            }
            let econ = a.economy.load()?;
            let m = econ.pi.income();
            let tol = positive("tol", a.tol)?;
            let declared = econ.spec.degrees().map(|d| d.phi);
            let mut rows = Vec::with_capacity(a.t.len());
            for &t in &a.t {
                let q = CvQuery::new(&econ.spec, &econ.pi, &econ.z, t)?;
                let r = compensating_variation(&q, tol)?;
                let measured = if t == 1.0 { None } else { phi_from_cv(r.cv_brute_force, m, t).ok() };
                if let (Some(d), Some(mp)) = (declared, measured) {
                    if (d - mp).abs() > PHI_WARN_GAP {
                        eprintln!("cv-kit: warning: at t = {t} measured phi {mp:.6} differs from declared {d:.6}");
                    }
                }
                rows.push(CvRow {
                    t,
                    cv_closed_form: Some(r.cv_closed_form).filter(|v| v.is_finite()),
                    cv_brute_force: Some(r.cv_brute_force),
                    per_good: Some(r.per_good),
                    phi_measured: measured,
                    baseline_utility: Some(r.baseline_utility),
                });
            }
            CvReport { family: Some(econ.spec.family_name().to_string()), phi_declared: declared, income: m, rows }
        }
    };

    let content = match format_of(&a.output, Format::Json) {
        Format::Json => output::json(&report)?,
        Format::Csv => {
            let goods = report.rows.first().and_then(|r| r.per_good.as_ref()).map_or(0, Vec::len);
            let mut header: Vec<String> =
                ["t", "cv_closed_form", "cv_brute_force", "phi_measured", "baseline_utility"].map(String::from).into();
            header.extend((1..=goods).map(|i| format!("cv_good_{i}")));
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| {
                    let mut row = vec![
                        num(r.t),
                        opt(r.cv_closed_form),
                        opt(r.cv_brute_force),
                        opt(r.phi_measured),
                        opt(r.baseline_utility),
                    ];
                    row.extend(r.per_good.iter().flatten().map(|v| num(*v)));
                    row
                })
                .collect();
            output::csv(&header, &rows)
        }
    };
    output::emit(a.output.out.as_deref(), &content)
}

struct Generated {
    panel: Panel,
    phi_declared: Option<f64>,
    noisy: bool,
}

fn generate(source: &PanelSource) -> Result<Generated, Failure> {
    let econ = source.economy.load()?;
    let panel = generate_panel(&econ.spec, &econ.pi, &econ.z, &source.t_values(), source.noise, source.seed)?;
    Ok(Generated { panel, phi_declared: econ.spec.degrees().map(|d| d.phi), noisy: source.noise > 0.0 })
}

#[derive(Debug, Serialize)]
struct EstimateReport {
    observations: usize,
    noise_sd: Option<f64>,
    seed: Option<u64>,
    results: Vec<PhiRecovery>,
}

fn modes(spec: &str, n_goods: usize) -> Result<Vec<Mode>, Failure> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(std::iter::once(Mode::Income).chain((1..=n_goods).map(Mode::Good)).collect());
    }
    let mode: Mode = spec.parse().map_err(|e: cvkit::Error| Failure::usage(e.to_string()))?;
    if let Mode::Good(n) = mode {
        if n > n_goods {
            return Err(Failure::usage(format!("good({n}) but the panel has {n_goods} goods")));
        }
    }
    Ok(vec![mode])
}

pub fn estimate(a: &EstimateArgs) -> Result<(), Failure> {
    let (g, noise_sd, seed) = match &a.panel {
        Some(path) => {
            if !a.source.economy.is_empty() || !a.source.t.is_empty() || a.source.n.is_some() {
                return Err(Failure::usage("--panel cannot be combined with generation flags"));
            }
            let file = std::fs::File::open(path)
                .map_err(|e| Failure::usage(format!("cannot read panel {}: {e}", path.display())))?;
            let panel = read_panel_csv(file)?;
            (Generated { panel, phi_declared: a.phi, noisy: a.noisy }, None, None)
        }
        None => (generate(&a.source)?, Some(a.source.noise), Some(a.source.seed)),
    };
    let results = modes(&a.mode, g.panel.n_goods)?
        .into_iter()
        .map(|mode| recover_from_panel(&g.panel, g.phi_declared, g.noisy, mode))
        .collect::<Result<Vec<_>, _>>()?;
    let report = EstimateReport { observations: g.panel.len(), noise_sd, seed, results };
    let content = match format_of(&a.output, Format::Json) {
        Format::Json => output::json(&report)?,
        Format::Csv => {
            let header = ["mode", "phi_hat", "beta0", "stderr_beta1", "r_squared", "phi_declared", "agreement"]
                .map(String::from);
            let rows: Vec<Vec<String>> = report
                .results
                .iter()
                .map(|r| {
                    vec![
                        r.mode.to_string(),
                        num(r.phi_hat),
                        num(r.estimation.beta0),
                        num(r.estimation.stderr_beta1),
                        num(r.estimation.r_squared),
                        opt(r.phi_declared),
                        r.agreement.to_string(),
                    ]
                })
                .collect();
            output::csv(&header, &rows)
        }
    };
    output::emit(a.output.out.as_deref(), &content)
}

pub fn panel(a: &PanelArgs) -> Result<(), Failure> {
    let g = generate(&a.source)?;
    let content = match format_of(&a.output, Format::Csv) {
        Format::Json => output::json(&g.panel)?,
        Format::Csv => {
            let mut buf = Vec::new();
            write_panel_csv(&g.panel, &mut buf, Some(output::CSV_DIGITS))?;
            String::from_utf8(buf).map_err(|e| Failure::usage(e.to_string()))?
        }
    };
    output::emit(a.output.out.as_deref(), &content)
}

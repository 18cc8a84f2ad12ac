use std::io::{Read, Write};
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::duality::{solve_emp, solve_ump, EmpResult, DEFAULT_EMP_TOL, DEFAULT_UMP_TOL};
use crate::error::{Error, Result};
use crate::utility::{PriceIncome, PublicBundle, UtilitySpec};

/// One proportional provision change and the compensated response to it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProvisionObservation {
    pub t: f64,
    pub m_before: f64,
    pub m_after: f64,
    pub x_before: Option<Vec<f64>>,
    pub x_after: Option<Vec<f64>>,
    /// Log-noise draw applied to `m_after`.
    pub noise_applied: f64,
}

impl ProvisionObservation {
    fn check(&self, row: usize) -> Result<()> {
        let bad = |name: &str, v: f64| {
            Error::Domain(format!("row {row}: {name} = {v} must be strictly positive"))
        };
        for (name, v) in [("t", self.t), ("m_before", self.m_before), ("m_after", self.m_after)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(bad(name, v));
            }
        }
        for (name, xs) in [("x_before", &self.x_before), ("x_after", &self.x_after)] {
            if let Some(v) = xs.iter().flatten().find(|v| !(**v > 0.0) || !v.is_finite()) {
                return Err(bad(name, *v));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Panel {
    pub n_goods: usize,
    pub rows: Vec<ProvisionObservation>,
}

impl Panel {
    pub fn new(n_goods: usize, rows: Vec<ProvisionObservation>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            for xs in [&r.x_before, &r.x_after].into_iter().flatten() {
                if xs.len() != n_goods {
                    return Err(Error::DimensionMismatch { what: "panel bundle", expected: n_goods, found: xs.len() });
                }
            }
            r.check(i)?;
        }
        Ok(Self { n_goods, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn noise(seed: u64, row: usize, sd: f64, count: usize) -> Result<Vec<f64>> {
    if sd == 0.0 {
        return Ok(vec![0.0; count]);
    }
    let normal = Normal::new(0.0, sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    Ok((0..count).map(|_| normal.sample(&mut rng)).collect())
}

fn observation(t: f64, income: f64, before: &EmpResult, after: &EmpResult, draws: &[f64]) -> ProvisionObservation {
    // Rescale so the baseline is exactly the base income despite solver tolerance.
    let scale = income / before.expenditure;
    ProvisionObservation {
        t,
        m_before: income,
        m_after: income * (after.expenditure / before.expenditure) * draws[0].exp(),
        x_before: Some(before.demand.as_slice().iter().map(|x| x * scale).collect()),
        x_after: Some(
            after
                .demand
                .as_slice()
                .iter()
                .zip(&draws[1..])
                .map(|(x, d)| x * scale * d.exp())
                .collect(),
        ),
        noise_applied: draws[0],
    }
}

/// Synthetic panel of compensated incomes after `z1 -> t z1`.
///
/// Post-change incomes come from numerical expenditure minimization at the
/// baseline utility `v(m, p; z)`, never from the CV formula. Each
/// post-change quantity gets independent multiplicative noise
/// `exp(N(0, noise_sd^2))`; row `i` draws from ChaCha8 stream `i` of `seed`, so
/// panels are reproducible and independent of evaluation order.
pub fn generate_panel(
    spec: &UtilitySpec,
    base: &PriceIncome,
    z: &PublicBundle,
    t_values: &[f64],
    noise_sd: f64,
    seed: u64,
) -> Result<Panel> {
    if let Some(t) = t_values.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidParameter(format!("provision scaling t must be positive, got {t}")));
    }
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return Err(Error::InvalidParameter(format!("noise_sd must be non-negative, got {noise_sd}")));
    }
    let n = base.prices().len();
    let u0 = solve_ump(spec, base, z, DEFAULT_UMP_TOL)?.indirect_utility;
    let before = solve_emp(spec, u0, base.prices(), z, DEFAULT_EMP_TOL)?;

    let row = |i: usize, t: f64| -> Result<ProvisionObservation> {
        let draws = noise(seed, i, noise_sd, n + 1)?;
        let after = if t == 1.0 {
            before.clone()
        } else {
            solve_emp(spec, u0, base.prices(), &z.scaled(t)?, DEFAULT_EMP_TOL)?
        };
        Ok(observation(t, base.income(), &before, &after, &draws))
    };

    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(t_values.len().max(1));
    let chunk = t_values.len().div_ceil(workers).max(1);
    let rows: Vec<Result<ProvisionObservation>> = thread::scope(|s| {
        let handles: Vec<_> = t_values
            .chunks(chunk)
            .enumerate()
            .map(|(c, ts)| {
                let row = &row;
                s.spawn(move || ts.iter().enumerate().map(|(j, &t)| row(c * chunk + j, t)).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("panel worker panicked")).collect()
    });
    Panel::new(n, rows.into_iter().collect::<Result<_>>()?)
}

fn header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "m_before".into(), "m_after".into()];
    h.extend((1..=n).map(|i| format!("x_before_{i}")));
    h.extend((1..=n).map(|i| format!("x_after_{i}")));
    h.push("noise".into());
    h
}

/// Writes the panel as CSV. `digits` selects significant digits; `None`
/// writes the shortest round-trip representation.
pub fn write_panel_csv<W: Write>(panel: &Panel, out: W, digits: Option<usize>) -> Result<()> {
    let fmt = |v: f64| match digits {
        Some(d) => format_significant(v, d),
        None => v.to_string(),
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(panel.n_goods))?;
    for r in &panel.rows {
        let mut rec = vec![fmt(r.t), fmt(r.m_before), fmt(r.m_after)];
        for xs in [&r.x_before, &r.x_after] {
            match xs {
                Some(xs) => rec.extend(xs.iter().map(|v| fmt(*v))),
                None => rec.extend(std::iter::repeat_n(String::new(), panel.n_goods)),
            }
        }
        rec.push(fmt(r.noise_applied));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `v` with `digits` significant digits, locale-free, trailing zeros trimmed.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return v.to_string();
    }
    let digits = digits.max(1);
    let s = format!("{:.*e}", digits - 1, v);
    let parsed: f64 = s.parse().unwrap_or(v);
    let exp = parsed.abs().log10().floor() as i32;
    if (-5..=15).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, parsed);
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        s
    }
}

pub fn read_panel_csv<R: Read>(input: R) -> Result<Panel> {
    let mut r = csv::Reader::from_reader(input);
    let head: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if head.len() < 4 || (head.len() - 4) % 2 != 0 {
        return Err(Error::InvalidParameter(format!("unexpected panel header: {}", head.join(","))));
    }
    let n = (head.len() - 4) / 2;
    if head != header(n) {
        return Err(Error::InvalidParameter(format!("unexpected panel header: {}", head.join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> Result<Option<f64>> {
            let s = rec.get(j).unwrap_or("").trim();
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>()
                .map(Some)
                .map_err(|e| Error::InvalidParameter(format!("row {i}, column {}: {e}", head[j])))
        };
        let req = |j: usize| -> Result<f64> {
            num(j)?.ok_or_else(|| Error::InvalidParameter(format!("row {i}: missing {}", head[j])))
        };
        let bundle = |start: usize| -> Result<Option<Vec<f64>>> {
            let vals: Vec<Option<f64>> = (start..start + n).map(&num).collect::<Result<_>>()?;
            if vals.iter().all(Option::is_none) {
                return Ok(None);
            }
            vals.into_iter()
                .map(|v| v.ok_or_else(|| Error::InvalidParameter(format!("row {i}: partially missing bundle"))))
                .collect::<Result<Vec<_>>>()
                .map(Some)
        };
        rows.push(ProvisionObservation {
            t: req(0)?,
            m_before: req(1)?,
            m_after: req(2)?,
            x_before: bundle(3)?,
            x_after: bundle(3 + n)?,
            noise_applied: req(3 + 2 * n)?,
        });
    }
    Panel::new(n, rows)
}

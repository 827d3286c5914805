//! Importer for the MATPOWER `.m` table subset (`baseMVA`, `bus`, `gen`,
//! `branch`, `gencost`).
//!
//! The series-only network model has no place for shunts, line charging,
//! tap ratios or phase shifts; those are dropped with a warning. Parallel
//! branches are merged by summing their series admittances.

use std::collections::BTreeMap;

use log::warn;

use super::{BranchRecord, BusKind, BusRecord, GeneratorRecord, NetworkCase};
use crate::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct ImportOptions {
    /// Keep only the linear term of quadratic cost curves instead of failing.
    pub drop_quadratic_cost: bool,
}

type Table = Vec<(usize, Vec<f64>)>;

/// Extracts `mpc.<name> = [ ... ];` as rows of numbers with source lines.
fn table(text: &str, name: &str) -> Result<Option<Table>> {
    let key = format!("mpc.{name}");
    let mut rows = Vec::new();
    let mut inside = false;
    let mut found = false;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let mut content = raw.split('%').next().unwrap_or("").trim();
        if !inside {
            let Some(rest) = content.strip_prefix(key.as_str()) else { continue };
            let rest = rest.trim_start();
            let Some(rest) = rest.strip_prefix('=') else { continue };
            let Some(rest) = rest.trim_start().strip_prefix('[') else {
                return Err(Error::Parse { line, message: format!("{key} is not a matrix literal") });
            };
            inside = true;
            found = true;
            content = rest;
        }
        let (body, done) = match content.find(']') {
            Some(end) => (&content[..end], true),
            None => (content, false),
        };
        for row in body.split(';') {
            let toks: Vec<&str> = row.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).collect();
            if toks.is_empty() {
                continue;
            }
            let vals = toks
                .iter()
                .map(|t| t.parse::<f64>().map_err(|_| Error::Parse { line, message: format!("{key}: cannot parse {t:?}") }))
                .collect::<Result<Vec<_>>>()?;
            rows.push((line, vals));
        }
        if done {
            break;
        }
    }
    Ok(found.then_some(rows))
}

fn scalar(text: &str, name: &str) -> Option<f64> {
    let key = format!("mpc.{name}");
    text.lines().find_map(|raw| {
        let content = raw.split('%').next()?.trim();
        let rest = content.strip_prefix(key.as_str())?.trim_start().strip_prefix('=')?;
        rest.trim().trim_end_matches(';').trim().parse().ok()
    })
}

fn col(line: usize, row: &[f64], k: usize, what: &str) -> Result<f64> {
    row.get(k).copied().ok_or_else(|| Error::Parse { line, message: format!("{what} row has no column {}", k + 1) })
}

pub fn import_matpower(text: &str, name: &str, opts: &ImportOptions) -> Result<NetworkCase> {
    let base = scalar(text, "baseMVA").unwrap_or(100.0);
    let missing = |t: &str| Error::Format(format!("missing mpc.{t} table"));
    let bus_rows = table(text, "bus")?.ok_or_else(|| missing("bus"))?;
    let gen_rows = table(text, "gen")?.ok_or_else(|| missing("gen"))?;
    let branch_rows = table(text, "branch")?.ok_or_else(|| missing("branch"))?;
    let cost_rows = table(text, "gencost")?.ok_or_else(|| missing("gencost"))?;

    // External bus numbers -> 0-based positions; isolated buses (type 4) are
    // dropped.
    let mut index = BTreeMap::new();
    let mut reference = None;
    let mut raw_buses = Vec::new();
    for (line, row) in &bus_rows {
        let ext = col(*line, row, 0, "bus")? as i64;
        let kind = col(*line, row, 1, "bus")? as i64;
        if kind == 4 {
            warn!("dropping isolated bus {ext}");
            continue;
        }
        let (gs, bs) = (col(*line, row, 4, "bus")?, col(*line, row, 5, "bus")?);
        if gs != 0.0 || bs != 0.0 {
            warn!("bus {ext}: shunt (Gs={gs}, Bs={bs}) is not modelled and was dropped");
        }
        if index.insert(ext, raw_buses.len()).is_some() {
            return Err(Error::Parse { line: *line, message: format!("duplicate bus number {ext}") });
        }
        if kind == 3 {
            reference = Some(raw_buses.len());
        }
        raw_buses.push(BusRecord {
            id: raw_buses.len(),
            kind: BusKind::Load,
            p_demand: col(*line, row, 2, "bus")? / base,
            q_demand: col(*line, row, 3, "bus")? / base,
            v_max: col(*line, row, 11, "bus")?,
            v_min: col(*line, row, 12, "bus")?,
        });
    }
    let lookup = |line: usize, ext: f64| {
        index.get(&(ext as i64)).copied().ok_or_else(|| Error::Parse { line, message: format!("unknown bus {ext}") })
    };

    if cost_rows.len() < gen_rows.len() {
        return Err(Error::Format("gencost has fewer rows than gen".into()));
    }
    let mut generators = Vec::new();
    for ((line, row), (cline, cost)) in gen_rows.iter().zip(&cost_rows) {
        if col(*line, row, 7, "gen")? <= 0.0 {
            warn!("dropping out-of-service generator at bus {}", row[0]);
            continue;
        }
        let bus = lookup(*line, row[0])?;
        let c1 = linear_cost(*cline, cost, base, opts)?;
        raw_buses[bus].kind = BusKind::Generator;
        generators.push(GeneratorRecord {
            bus,
            cost: c1,
            q_max: col(*line, row, 3, "gen")? / base,
            q_min: col(*line, row, 4, "gen")? / base,
            p_max: col(*line, row, 8, "gen")? / base,
            p_min: col(*line, row, 9, "gen")? / base,
        });
    }

    let mut merged: BTreeMap<(usize, usize), (f64, f64, f64)> = BTreeMap::new();
    for (line, row) in &branch_rows {
        if row.get(10).copied().unwrap_or(1.0) <= 0.0 {
            warn!("dropping out-of-service branch {}-{}", row[0], row[1]);
            continue;
        }
        let (a, b) = (lookup(*line, row[0])?, lookup(*line, row[1])?);
        let (r, x) = (col(*line, row, 2, "branch")?, col(*line, row, 3, "branch")?);
        let charging = col(*line, row, 4, "branch")?;
        let rate = col(*line, row, 5, "branch")? / base;
        let tap = row.get(8).copied().unwrap_or(0.0);
        let shift = row.get(9).copied().unwrap_or(0.0);
        if charging != 0.0 || (tap != 0.0 && tap != 1.0) || shift != 0.0 {
            warn!("branch {}-{}: line charging, tap ratio and phase shift are not modelled", row[0], row[1]);
        }
        let z2 = r * r + x * x;
        if z2 == 0.0 {
            return Err(Error::Parse { line: *line, message: "branch with zero impedance".into() });
        }
        let entry = merged.entry((a.min(b), a.max(b))).or_insert((0.0, 0.0, 0.0));
        if entry.0 != 0.0 || entry.1 != 0.0 {
            warn!("merging parallel branch {}-{}", row[0], row[1]);
        }
        entry.0 += r / z2;
        entry.1 += -x / z2;
        // A zero rating means unlimited; parallel ratings add up.
        entry.2 = if rate <= 0.0 || entry.2.is_infinite() { f64::INFINITY } else { entry.2 + rate };
    }
    let branches = merged
        .into_iter()
        .map(|((a, b), (g, bs, rate))| {
            let y = g.hypot(bs);
            // |i|² ≤ rate²  ⇔  |Y|·|v_a − v_b|² ≤ rate²/|Y|. Unrated lines get
            // a bound that cannot bind inside the voltage box.
            let i_max = if rate.is_finite() {
                rate * rate / y
            } else {
                let vmax = raw_buses[a].v_max + raw_buses[b].v_max;
                y * vmax * vmax * 1.01
            };
            BranchRecord { from: a, to: b, g_series: g, b_series: bs, i_max }
        })
        .collect();

    let reference = reference.ok_or_else(|| Error::Format("case has no reference (type 3) bus".into()))?;
    NetworkCase::new(name, raw_buses, branches, generators, reference)
}

/// Linear coefficient of a polynomial (model 2) cost row, per-unit.
fn linear_cost(line: usize, row: &[f64], base: f64, opts: &ImportOptions) -> Result<f64> {
    if col(line, row, 0, "gencost")? != 2.0 {
        return Err(Error::Parse { line, message: "only polynomial (model 2) costs are supported".into() });
    }
    let n = col(line, row, 3, "gencost")? as usize;
    let coeffs: Vec<f64> = (0..n).map(|k| col(line, row, 4 + k, "gencost")).collect::<Result<_>>()?;
    // Highest order first: [..., c2, c1, c0].
    let c1 = if n >= 2 { coeffs[n - 2] } else { 0.0 };
    let higher = &coeffs[..n.saturating_sub(2)];
    if higher.iter().any(|&c| c != 0.0) {
        if !opts.drop_quadratic_cost {
            return Err(Error::Parse {
                line,
                message: "quadratic generator cost is not supported (enable dropping of higher-order terms to import anyway)".into(),
            });
        }
        warn!("line {line}: dropping higher-order cost terms {higher:?}");
    }
    if n >= 1 && coeffs[n - 1] != 0.0 {
        warn!("line {line}: constant cost term {} dropped", coeffs[n - 1]);
    }
    Ok(c1 * base)
}

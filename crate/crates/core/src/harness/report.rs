//! Report files: the results table, full JSON, and plot-ready CSVs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Model;
use super::metrics::{dual_series, lagrangian_error};
use super::pipeline::RunReport;
use super::reference::market_multipliers;
use crate::grid::assemble_qcqp;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Csv,
    Json,
}

/// One results-table row; errors and violations in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub model: String,
    pub x_err: f64,
    pub lambda_err: f64,
    pub viol_count: f64,
    pub viol_max: f64,
    pub viol_mean: f64,
}

/// Averages over instances with metrics: mean errors, mean violation count
/// per instance, largest violation, violation averaged over rows and
/// instances.
pub fn table1(report: &RunReport) -> Vec<Table1Row> {
    let mut models: Vec<Model> = report.runs.iter().map(|r| r.model).collect();
    models.sort();
    models.dedup();
    models
        .into_iter()
        .filter_map(|model| {
            let ms: Vec<_> = report.runs.iter().filter(|r| r.model == model).filter_map(|r| r.metrics).collect();
            if ms.is_empty() {
                return None;
            }
            let k = ms.len() as f64;
            Some(Table1Row {
                model: model.label().to_string(),
                x_err: 100.0 * ms.iter().map(|m| m.x_err).sum::<f64>() / k,
                lambda_err: 100.0 * ms.iter().map(|m| m.lambda_err).sum::<f64>() / k,
                viol_count: ms.iter().map(|m| m.violations.count as f64).sum::<f64>() / k,
                viol_max: ms.iter().map(|m| m.violations.max_pct).fold(0.0, f64::max),
                viol_mean: ms.iter().map(|m| m.violations.mean_pct).sum::<f64>() / k,
            })
        })
        .collect()
}

fn csv_string<T: Serialize>(header: &[&str], rows: &[T]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Format(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?).map_err(|e| Error::Format(e.to_string()))
}

pub fn table1_csv(rows: &[Table1Row]) -> Result<String> {
    csv_string(&["model", "x_err", "lambda_err", "viol_count", "viol_max", "viol_mean"], rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SeriesPoint {
    series: String,
    index: usize,
    value: f64,
}

/// Concatenated sorted market multipliers per model, plus the reference.
fn dual_points(report: &RunReport) -> Vec<SeriesPoint> {
    let mut out = Vec::new();
    let mut push = |name: &str, values: Vec<f64>| {
        out.extend(dual_series(values).into_iter().enumerate().map(|(i, v)| SeriesPoint { series: name.to_string(), index: i, value: v }));
    };
    let base = match super::pipeline::base_case(&report.config) {
        Ok(c) => c,
        Err(_) => return out,
    };
    let problem = assemble_qcqp(&base);
    let mut models: Vec<Model> = report.runs.iter().map(|r| r.model).collect();
    models.sort();
    models.dedup();
    for model in models {
        let values: Vec<f64> =
            report.runs.iter().filter(|r| r.model == model).flat_map(|r| market_multipliers(&problem, &r.lambda)).collect();
        push(model.label(), values);
    }
    if let Some(r) = &report.reference {
        push("reference", r.instances.iter().flat_map(|i| i.lambda.iter().copied()).collect());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LagrangianPoint {
    model: String,
    instance: usize,
    iteration: usize,
    rel_err: f64,
}

fn lagrangian_points(report: &RunReport) -> Vec<LagrangianPoint> {
    let Some(reference) = &report.reference else { return Vec::new() };
    report
        .runs
        .iter()
        .flat_map(|r| {
            let p_star = reference.instances.get(r.instance).map(|i| i.cost);
            r.trajectory.iter().filter_map(move |t| {
                p_star.map(|p| LagrangianPoint {
                    model: r.model.label().to_string(),
                    instance: r.instance,
                    iteration: t.iteration,
                    rel_err: lagrangian_error(t.lagrangian + r.objective_offset, p),
                })
            })
        })
        .collect()
}

/// Writes `table1.csv`, `report.json`, `duals.csv`, `lagrangian.csv`,
/// `pattern.csv` and one trajectory CSV per run into `dir`.
pub fn emit_report(report: &RunReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir.join("trajectories")).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut write = |name: &str, text: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        written.push(p);
        Ok(())
    };
    write("table1.csv", table1_csv(&table1(report))?)?;
    write("report.json", report_json(report))?;
    write("duals.csv", csv_string(&["series", "index", "value"], &dual_points(report))?)?;
    write("lagrangian.csv", csv_string(&["model", "instance", "iteration", "rel_err"], &lagrangian_points(report))?)?;
    let s = report.stats;
    write(
        "pattern.csv",
        csv_string(
            &["case", "n", "log2_n", "bandwidth_natural", "bandwidth_rcm", "colors_natural", "colors_rcm"],
            &[(report.case.as_str(), s.n, (s.n as f64).log2(), s.bandwidth_natural, s.bandwidth_rcm, s.colors_natural, s.colors_rcm)],
        )?,
    )?;
    for r in &report.runs {
        let name = format!("trajectories/{}-{}.csv", serde_plain_model(r.model), r.instance);
        write(&name, crate::saddle::trajectory_csv(&r.trajectory))?;
    }
    Ok(written)
}

fn serde_plain_model(m: Model) -> String {
    serde_json::to_string(&m).expect("model serializes").trim_matches('"').to_string()
}

pub fn report_json(report: &RunReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

pub fn load_report(path: impl AsRef<Path>) -> Result<RunReport> {
    let mut path = path.as_ref().to_path_buf();
    if path.is_dir() {
        path = path.join("report.json");
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("report: {e}")))
}

/// Table or JSON summary of a report in the requested format.
pub fn render(report: &RunReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => table1_csv(&table1(report)),
        ReportFormat::Json => Ok(serde_json::to_string_pretty(&table1(report)).expect("rows serialize")),
    }
}

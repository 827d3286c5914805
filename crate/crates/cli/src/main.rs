//! `qopf`: batch front end for the doubly variational OPF solver.
//!
//! Exit codes: 0 success, 1 invalid input, 2 divergence, 3 I/O.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qopf_core::bounds::{budget, BoundInputs};
use qopf_core::grid::{import_matpower, write_case, ImportOptions};
use qopf_core::harness::{
    base_case, context_for, emit_report, load_case_file, load_references, generate_instances, prepare, render, run_experiment,
    run_fit, table1, table1_csv, ExperimentConfig, FitResult, PreparedCase, ReportFormat,
};
use qopf_core::statevector::GateKind;
use qopf_core::xbm::{decompose, JointDecomposition};
use qopf_core::{rng, Error};

#[derive(Parser)]
#[command(name = "qopf", version, about = "Doubly variational quantum AC optimal power flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, permute and assemble a case; cache the result as JSON.
    Prepare {
        case: PathBuf,
        /// Output file (default: `<case stem>.prepared.json` beside the case).
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        topo: TopologyArgs,
    },
    /// Run every configured model on every instance and write a report.
    Solve {
        config: PathBuf,
        /// Report directory (overrides `output_dir`).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Lipschitz constant, variance bound and sample budget.
    Bounds { config: PathBuf },
    /// Colour decomposition statistics of a case's permuted observables.
    XbmStats {
        case: PathBuf,
        #[command(flatten)]
        topo: TopologyArgs,
    },
    /// Rank candidate ansätze by their fit to reference solutions.
    Fit {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Summarize a finished run directory (or its report.json).
    Report {
        run_dir: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Bandwidth and colour count before/after reordering, as one CSV row.
    Permute {
        case: PathBuf,
        #[command(flatten)]
        topo: TopologyArgs,
        /// Omit the header line.
        #[arg(long)]
        no_header: bool,
    },
    /// Convert a MATPOWER case file to the native case format.
    Import {
        matpower: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Case name (default: file stem).
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        drop_quadratic_cost: bool,
    },
}

#[derive(clap::Args)]
struct TopologyArgs {
    #[arg(long, default_value_t = 200)]
    rcm_runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep only the linear term of quadratic MATPOWER costs.
    #[arg(long)]
    drop_quadratic_cost: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } => 2,
        Error::Io { .. } => 3,
        _ => 1,
    }
}

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source: e }
}

fn prepared(case: &Path, topo: &TopologyArgs) -> Result<PreparedCase, Error> {
    let case = load_case_file(case, topo.drop_quadratic_cost)?;
    prepare(&case, topo.rcm_runs, topo.seed)
}

fn cmd_prepare(case_path: &Path, out: Option<PathBuf>, topo: &TopologyArgs) -> Result<(), Error> {
    let prep = prepared(case_path, topo)?;
    let out = out.unwrap_or_else(|| {
        let stem = case_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "case".into());
        case_path.with_file_name(format!("{stem}.prepared.json"))
    });
    prep.save(&out)?;
    let s = prep.stats;
    println!("case {}: N = {} (padded {}), M = {} (padded {})", prep.case.name, s.n, s.n_padded, s.m, s.m_padded);
    println!("bandwidth {} -> {}, colours {} -> {}", s.bandwidth_natural, s.bandwidth_rcm, s.colors_natural, s.colors_rcm);
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_solve(config: &Path, out: Option<PathBuf>) -> Result<u8, Error> {
    let cfg = ExperimentConfig::load(config)?;
    let dir = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("qopf-run"));
    let report = run_experiment(&cfg)?;
    emit_report(&report, &dir)?;
    print!("{}", table1_csv(&table1(&report))?);
    for f in &report.failures {
        eprintln!("{} instance {}: {}", f.model.label(), f.instance, f.error);
    }
    log::info!("report written to {}", dir.display());
    Ok(if report.failures.iter().any(|f| f.diverged) { 2 } else { 0 })
}

fn cmd_bounds(config: &Path) -> Result<(), Error> {
    let cfg = ExperimentConfig::load(config)?;
    cfg.validate()?;
    let base = base_case(&cfg)?;
    let prep = prepare(&base, cfg.rcm_runs, rng::derive(cfg.seed, 1))?;
    let ctx = context_for(&prep, &cfg)?;
    let alpha_bar = cfg.bounds.alpha_bar.unwrap_or_else(|| BoundInputs::default_alpha_bar(base.n()));
    let beta_bar = match cfg.bounds.beta_bar {
        Some(b) => b,
        None => default_beta_bar(&cfg, &base)?,
    };
    let mut x = BoundInputs::from_context(&ctx, alpha_bar, beta_bar);
    x.rho = cfg.bounds.rho;
    x.epsilon = cfg.bounds.epsilon;
    x.dist0 = cfg.bounds.dist0;
    let b = budget(&x)?;
    println!("quantity,value");
    println!("P,{}", x.p);
    println!("Q,{}", x.q);
    println!("colors,{}", x.colors);
    println!("alpha_bar,{alpha_bar}");
    println!("beta_bar,{beta_bar}");
    println!("L,{}", b.lipschitz);
    println!("sigma_sq,{}", b.sigma_sq);
    println!("T,{}", b.iterations);
    println!("S,{}", b.shots);
    println!("circuits_per_iteration,{}", b.circuits_per_iter);
    println!("total_samples,{}", b.total);
    println!("total_samples_exact,{}", b.total_exact);
    Ok(())
}

/// `2·√(Σλ*)` averaged over references when available, else twice the
/// initial `β`.
fn default_beta_bar(cfg: &ExperimentConfig, base: &qopf_core::grid::NetworkCase) -> Result<f64, Error> {
    if cfg.reference.is_some() {
        let instances = generate_instances(base, cfg.instances.count, cfg.instances.scale, rng::derive(cfg.seed, 0));
        if let Some(r) = load_references(cfg, &instances)? {
            let sums: Vec<f64> = r.instances.iter().filter_map(|i| i.lambda_full.as_ref()).map(|l| l.iter().sum::<f64>()).collect();
            if !sums.is_empty() {
                return Ok(2.0 * (sums.iter().sum::<f64>() / sums.len() as f64).sqrt());
            }
        }
    }
    let init = cfg.init.beta.unwrap_or(2.0 * base.load_buses().len() as f64);
    Ok(2.0 * init)
}

fn cmd_xbm_stats(case: &Path, topo: &TopologyArgs) -> Result<(), Error> {
    let prep = prepared(case, topo)?;
    let m0 = decompose(&prep.problem.m0)?;
    let joint = JointDecomposition::new(prep.problem.constraints.iter().map(|c| &c.matrix))?;
    let mut colors: Vec<usize> = m0.colors();
    colors.extend(joint.pieces.iter().map(|p| p.color));
    colors.sort_unstable();
    colors.dedup();
    println!("# C = {}, M0 pieces = {}, constraint pieces = {}", colors.len(), m0.pieces.len(), joint.pieces.len());
    println!("# sum_c |M0^c|^2 = {}", m0.sum_sq_norms());
    println!("# sum_c max_m |Mm^c|^2 = {}", joint.sum_sq_max_norms());
    println!("family,color,part,members,single_qubit_gates,cx_gates,max_norm");
    let gate_counts = |gates: &[qopf_core::statevector::GateOp]| {
        let cx = gates.iter().filter(|g| g.kind == GateKind::CX).count();
        (gates.len() - cx, cx)
    };
    for p in &m0.pieces {
        let (sq, cx) = gate_counts(&p.circuit().gates);
        println!("m0,{},{},1,{sq},{cx},{}", p.color, part_name(p.part), p.norm());
    }
    for p in &joint.pieces {
        let (sq, cx) = gate_counts(&p.circuit(joint.n_qubits));
        println!("constraints,{},{},{},{sq},{cx},{}", p.color, part_name(p.part), p.members.len(), p.max_norm());
    }
    Ok(())
}

fn part_name(p: qopf_core::xbm::Part) -> &'static str {
    match p {
        qopf_core::xbm::Part::Real => "real",
        qopf_core::xbm::Part::Imaginary => "imaginary",
    }
}

fn cmd_fit(config: &Path, format: Format) -> Result<(), Error> {
    let cfg = ExperimentConfig::load(config)?;
    let report = run_fit(&cfg)?;
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("fit report serializes")),
        Format::Csv => {
            println!("ansatz,rank,row,layers,params,mean_cost");
            let rows = |name: &str, list: &[FitResult]| {
                for (k, r) in list.iter().enumerate() {
                    println!("{name},{},{},{},{},{}", k + 1, r.row, r.layers, r.params, r.mean_cost);
                }
            };
            rows("primal", &report.primal);
            rows("dual", &report.dual);
        }
    }
    Ok(())
}

fn cmd_report(dir: &Path, format: Format) -> Result<(), Error> {
    let report = qopf_core::harness::load_report(dir)?;
    print!("{}", render(&report, format.into())?);
    if matches!(format, Format::Json) {
        println!();
    }
    Ok(())
}

fn cmd_permute(case: &Path, topo: &TopologyArgs, no_header: bool) -> Result<(), Error> {
    let prep = prepared(case, topo)?;
    let s = prep.stats;
    if !no_header {
        println!("case,n,edges,bw_before,bw_after,colors_before,colors_after");
    }
    println!(
        "{},{},{},{},{},{},{}",
        prep.case.name,
        s.n,
        prep.case.n_edges(),
        s.bandwidth_natural,
        s.bandwidth_rcm,
        s.colors_natural,
        s.colors_rcm
    );
    Ok(())
}

fn cmd_import(path: &Path, out: Option<PathBuf>, name: Option<String>, drop_quadratic_cost: bool) -> Result<(), Error> {
    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
    let name = name.unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "case".into()));
    let case = import_matpower(&text, &name, &ImportOptions { drop_quadratic_cost })?;
    let body = write_case(&case);
    match out {
        Some(p) => std::fs::write(&p, body).map_err(|e| io(&p, e))?,
        None => print!("{body}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Prepare { case, out, topo } => cmd_prepare(&case, out, &topo).map(|_| 0),
        Command::Solve { config, out } => cmd_solve(&config, out),
        Command::Bounds { config } => cmd_bounds(&config).map(|_| 0),
        Command::XbmStats { case, topo } => cmd_xbm_stats(&case, &topo).map(|_| 0),
        Command::Fit { config, format } => cmd_fit(&config, format).map(|_| 0),
        Command::Report { run_dir, format } => cmd_report(&run_dir, format).map(|_| 0),
        Command::Permute { case, topo, no_header } => cmd_permute(&case, &topo, no_header).map(|_| 0),
        Command::Import { matpower, out, name, drop_quadratic_cost } => cmd_import(&matpower, out, name, drop_quadratic_cost).map(|_| 0),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // clap uses 2 for usage errors; that code is reserved for divergence here.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

//! Instance generation and the permute → assemble → solve → unpermute loop.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Model};
use super::metrics::{compute_metrics, FoundSolution, Metrics};
use super::oracle::{reference_for, OracleOptions};
use super::reference::{ReferenceInstance, ReferenceSolution};
use crate::grid::{assemble_qcqp, pad_to_qubits, BusKind, NetworkCase, QcqpProblem};
use crate::linalg::{log2_exact, C64};
use crate::permutation::{bandwidth, best_rcm, color_set, permute_problem, NodePermutation, SparsityPattern};
use crate::saddle::{self, ClassicalState, QuantumField, RunOptions, TrajectoryRow};
use crate::variational::{self, LagrangianContext};
use crate::{rng, Error, Result};

/// Bandwidth and colour counts before and after reordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternStats {
    pub n: usize,
    pub m: usize,
    pub n_padded: usize,
    pub m_padded: usize,
    pub bandwidth_natural: usize,
    pub bandwidth_rcm: usize,
    pub colors_natural: usize,
    pub colors_rcm: usize,
}

/// A case with its node ordering fixed and its padded, permuted QCQP.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreparedCase {
    pub case: NetworkCase,
    /// Ordering of the padded index space.
    pub permutation: NodePermutation,
    /// Padded and permuted problem.
    pub problem: QcqpProblem,
    pub stats: PatternStats,
}

impl PreparedCase {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("prepared case: {e}")))
    }

    /// Same ordering applied to another instance of the same topology.
    pub fn with_case(&self, case: NetworkCase) -> Result<PreparedCase> {
        let problem = permute_problem(&pad_to_qubits(&assemble_qcqp(&case)), &self.permutation)?;
        Ok(PreparedCase { case, permutation: self.permutation.clone(), problem, stats: self.stats })
    }

    /// Original-order voltages from a permuted padded vector.
    pub fn unpermute_voltage(&self, v: &[C64]) -> Vec<C64> {
        let mut out = self.permutation.unapply(v);
        out.truncate(self.case.n());
        out
    }
}

/// Reorders the admittance pattern with the best of `rcm_runs` RCM starts.
pub fn prepare(case: &NetworkCase, rcm_runs: usize, seed: u64) -> Result<PreparedCase> {
    let problem = assemble_qcqp(case);
    let padded = pad_to_qubits(&problem);
    let pattern = SparsityPattern::of_problem(&problem);
    let perm = best_rcm(&pattern, rcm_runs, seed)?;
    let extended = perm.extended(padded.dim());
    let permuted = permute_problem(&padded, &extended)?;
    let natural_padded = pattern.padded(padded.dim());
    let stats = PatternStats {
        n: problem.dim(),
        m: problem.m(),
        n_padded: padded.dim(),
        m_padded: padded.m(),
        bandwidth_natural: bandwidth(&pattern),
        bandwidth_rcm: bandwidth(&pattern.permuted(&perm)),
        colors_natural: color_set(&natural_padded)?.len(),
        colors_rcm: color_set(&natural_padded.permuted(&extended))?.len(),
    };
    Ok(PreparedCase { case: case.clone(), permutation: extended, problem: permuted, stats })
}

/// Load-scaled copies of `case`: every load bus gets its own uniform factor
/// from `[lo, hi]`; generator buses are left alone.
pub fn generate_instances(case: &NetworkCase, count: usize, range: [f64; 2], seed: u64) -> Vec<NetworkCase> {
    let [lo, hi] = range;
    (0..count)
        .map(|k| {
            let mut r = rng::derived_rng(seed, k as u64);
            let mut inst = case.clone();
            inst.name = format!("{}-{k}", case.name);
            for bus in inst.buses.iter_mut().filter(|b| b.kind == BusKind::Load) {
                let s = lo + (hi - lo) * r.random::<f64>();
                bus.p_demand *= s;
                bus.q_demand *= s;
            }
            inst
        })
        .collect()
}

/// Outcome of one model on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRun {
    pub model: Model,
    pub instance: usize,
    /// Original-order voltages `[re, im]`.
    pub voltage: Vec<[f64; 2]>,
    /// Multipliers of the unpadded rows.
    pub lambda: Vec<f64>,
    /// `[p_g; |v_g|]`.
    pub x: Vec<f64>,
    /// Final Lagrangian including the objective offset.
    pub lagrangian: f64,
    pub objective_offset: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_grad_norm: f64,
    pub total_shots: u64,
    pub wall_time_s: f64,
    pub metrics: Option<Metrics>,
    pub trajectory: Vec<TrajectoryRow>,
}

impl ModelRun {
    pub fn found(&self) -> FoundSolution {
        FoundSolution {
            v: self.voltage.iter().map(|&[re, im]| C64::new(re, im)).collect(),
            lambda: self.lambda.clone(),
            lagrangian: self.lagrangian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub model: Model,
    pub instance: usize,
    pub error: String,
    #[serde(default)]
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub case: String,
    pub config: ExperimentConfig,
    pub stats: PatternStats,
    pub runs: Vec<ModelRun>,
    pub failures: Vec<RunFailure>,
    #[serde(default)]
    pub reference: Option<ReferenceSolution>,
}

fn n_load_buses(case: &NetworkCase) -> usize {
    case.load_buses().len()
}

fn run_options(cfg: &ExperimentConfig, model: Model) -> RunOptions {
    RunOptions {
        method: model.method(),
        eg_variant: cfg.solver.eg_variant,
        divergence_ceiling: cfg.solver.divergence_ceiling,
        record_every: cfg.solver.record_every,
    }
}

/// Lagrangian context for a prepared instance under the configured ansätze.
pub fn context_for(prep: &PreparedCase, cfg: &ExperimentConfig) -> Result<LagrangianContext> {
    let nq = log2_exact(prep.problem.dim()).expect("padded");
    let mq = log2_exact(prep.problem.m()).expect("padded");
    Ok(LagrangianContext::new(prep.problem.clone(), cfg.primal.spec(nq)?, cfg.dual.spec(mq)?)?.with_backend(cfg.solver.backend))
}

/// Doubly variational solve of one instance.
pub fn solve_quantum(prep: &PreparedCase, cfg: &ExperimentConfig, model: Model, seed: u64) -> Result<ModelRun> {
    let start = Instant::now();
    let ctx = context_for(prep, cfg)?;
    let mut init = saddle::initial_state(ctx.p(), ctx.q(), prep.case.n(), n_load_buses(&prep.case), seed);
    if let Some(a) = cfg.init.alpha {
        init.alpha = a;
    }
    if let Some(b) = cfg.init.beta {
        init.beta = b;
    }
    let field = QuantumField { ctx: &ctx, mode: cfg.mode };
    let out = saddle::run(&field, init, &cfg.quantum_schedule, &cfg.stop, &run_options(cfg, model), rng::derive(seed, 1))?;
    let v = prep.unpermute_voltage(&variational::primal_vector(&ctx, &out.state.primal())?);
    let mut lambda = variational::dual_vector(&ctx, &out.state.dual())?;
    let m = prep.stats.m;
    lambda.truncate(m);
    Ok(finish(prep, model, v, lambda, out.final_lagrangian, &out.trajectory, (out.iterations, out.converged, out.final_grad_norm, out.total_shots), start))
}

/// Classical PD/EG on the raw (unpadded, natural-order) QCQP.
pub fn solve_classical(prep: &PreparedCase, cfg: &ExperimentConfig, model: Model, seed: u64) -> Result<ModelRun> {
    let start = Instant::now();
    let problem = assemble_qcqp(&prep.case);
    let init = ClassicalState::initial(&problem, n_load_buses(&prep.case), seed);
    let out = saddle::run_classical(&problem, init, &cfg.classical_schedule, &cfg.classical_stop, &run_options(cfg, model))?;
    let gv = crate::linalg::norm(&saddle::classical_grad_v(&problem, &out.state.v, &out.state.lambda));
    let gl = crate::linalg::real_norm(&saddle::classical_grad_lambda(&problem, &out.state.v));
    Ok(finish(
        prep,
        model,
        out.state.v,
        out.state.lambda,
        out.final_lagrangian,
        &out.trajectory,
        (out.iterations, out.converged, gv.hypot(gl), 0),
        start,
    ))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    prep: &PreparedCase,
    model: Model,
    v: Vec<C64>,
    lambda: Vec<f64>,
    lagrangian: f64,
    trajectory: &[TrajectoryRow],
    (iterations, converged, final_grad_norm, total_shots): (usize, bool, f64, u64),
    start: Instant,
) -> ModelRun {
    let offset = prep.problem.objective_offset;
    ModelRun {
        model,
        instance: 0,
        x: super::reference::generator_setpoints(&prep.case, &v),
        voltage: v.iter().map(|z| [z.re, z.im]).collect(),
        lambda,
        lagrangian: lagrangian + offset,
        objective_offset: offset,
        iterations,
        converged,
        final_grad_norm,
        total_shots,
        wall_time_s: start.elapsed().as_secs_f64(),
        metrics: None,
        trajectory: trajectory.to_vec(),
    }
}

pub fn solve_model(prep: &PreparedCase, cfg: &ExperimentConfig, model: Model, seed: u64) -> Result<ModelRun> {
    if model.is_quantum() {
        solve_quantum(prep, cfg, model, seed)
    } else {
        solve_classical(prep, cfg, model, seed)
    }
}

/// Per-model, per-instance external power-flow voltages.
pub type PowerFlowVoltages = BTreeMap<Model, Vec<Vec<[f64; 2]>>>;

/// References as configured: loaded from JSON, computed by the oracle, or
/// absent.
pub fn load_references(cfg: &ExperimentConfig, instances: &[NetworkCase]) -> Result<Option<ReferenceSolution>> {
    match cfg.reference.as_deref() {
        None => Ok(None),
        Some("oracle") => {
            let refs: Result<Vec<ReferenceInstance>> =
                instances.par_iter().map(|c| reference_for(c, &OracleOptions::default())).collect();
            Ok(Some(ReferenceSolution { case: instances.first().map(|c| c.name.clone()).unwrap_or_default(), instances: refs? }))
        }
        Some(path) => {
            let r = ReferenceSolution::load(path)?;
            if r.instances.len() < instances.len() {
                return Err(Error::validation(format!(
                    "reference file has {} instances, config asks for {}",
                    r.instances.len(),
                    instances.len()
                )));
            }
            Ok(Some(r))
        }
    }
}

/// The configured base case with the load convention applied.
pub fn base_case(cfg: &ExperimentConfig) -> Result<NetworkCase> {
    let case = cfg.load_case()?;
    Ok(if cfg.instances.simplify_loads { case.with_simplified_loads() } else { case })
}

/// Full experiment. Per-run failures (e.g. divergence) are recorded in the
/// report rather than aborting the others.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let base = base_case(cfg)?;
    let instances = generate_instances(&base, cfg.instances.count, cfg.instances.scale, rng::derive(cfg.seed, 0));
    let topology = prepare(&base, cfg.rcm_runs, rng::derive(cfg.seed, 1))?;
    let reference = load_references(cfg, &instances)?;
    let power_flow: Option<PowerFlowVoltages> = match &cfg.power_flow {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Some(serde_json::from_str(&text).map_err(|e| Error::Format(format!("power-flow file: {e}")))?)
        }
        None => None,
    };

    let jobs: Vec<(usize, Model)> = (0..instances.len()).flat_map(|k| cfg.models.iter().map(move |&m| (k, m))).collect();
    let outcomes: Vec<std::result::Result<ModelRun, RunFailure>> = jobs
        .par_iter()
        .map(|&(k, model)| {
            let fail = |e: Error| RunFailure { model, instance: k, diverged: matches!(e, Error::Divergence { .. }), error: e.to_string() };
            let prep = topology.with_case(instances[k].clone()).map_err(fail)?;
            let seed = rng::derive(rng::derive(cfg.seed, 2), k as u64);
            let mut run = solve_model(&prep, cfg, model, seed).map_err(fail)?;
            run.instance = k;
            if let Some(r) = &reference {
                let problem = assemble_qcqp(&prep.case);
                let pf: Option<Vec<C64>> = power_flow
                    .as_ref()
                    .and_then(|p| p.get(&model))
                    .and_then(|v| v.get(k))
                    .map(|v| v.iter().map(|&[re, im]| C64::new(re, im)).collect());
                run.metrics = Some(compute_metrics(&prep.case, &problem, &run.found(), &r.instances[k], pf.as_deref()).map_err(fail)?);
            }
            Ok(run)
        })
        .collect();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => runs.push(r),
            Err(f) => {
                log::warn!("{} on instance {} failed: {}", f.model, f.instance, f.error);
                failures.push(f);
            }
        }
    }
    Ok(RunReport { case: base.name.clone(), config: cfg.clone(), stats: topology.stats, runs, failures, reference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::fixtures::two_bus;

    #[test]
    fn degenerate_range_keeps_loads() {
        let case = two_bus();
        let inst = generate_instances(&case, 1, [1.0, 1.0], 3);
        assert_eq!(inst[0].buses, case.buses);
    }

    #[test]
    fn instances_stay_in_range_and_reproduce() {
        let case = two_bus();
        let a = generate_instances(&case, 15, [0.9, 1.05], 11);
        assert_eq!(a, generate_instances(&case, 15, [0.9, 1.05], 11));
        for inst in &a {
            let s = inst.buses[1].p_demand / case.buses[1].p_demand;
            assert!((0.9..=1.05).contains(&s));
            assert_eq!(inst.buses[0], case.buses[0]);
        }
    }

    #[test]
    fn prepare_two_bus() {
        let prep = prepare(&two_bus(), 4, 0).unwrap();
        assert_eq!((prep.stats.n_padded, prep.stats.m_padded), (2, 16));
        prep.problem.validate().unwrap();
    }
}

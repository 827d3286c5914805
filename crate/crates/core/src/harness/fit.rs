//! Architecture selection by fitting each candidate ansatz to reference
//! solutions.
//!
//! The primal cost is `1 − Re⟨ψ(θ)|v*⟩/‖v*‖`; the dual cost is the same
//! overlap against the amplitude vector `√(λ*/Σλ*)`. Both lie in `[0, 2]`
//! and vanish exactly when the ansatz reproduces the target. Minimization
//! is plain gradient descent with the exact `π`-shift overlap gradient.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::pipeline::{base_case, generate_instances, load_references, prepare};
use crate::linalg::C64;
use crate::statevector::{random_params, AnsatzSpec};
use crate::variational::{overlap_cost, overlap_gradient};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub iterations: usize,
    pub step: f64,
    pub restarts: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub row: u8,
    pub layers: usize,
    pub params: usize,
    /// Final cost per target.
    pub costs: Vec<f64>,
    pub mean_cost: f64,
}

/// Best final cost over `restarts` random starts for one target.
pub fn fit_one(spec: &AnsatzSpec, target: &[C64], opts: &FitOptions, seed: u64) -> Result<f64> {
    let mut best = f64::INFINITY;
    for r in 0..opts.restarts.max(1) {
        let mut theta = random_params(spec.param_count(), rng::derive(seed, r as u64));
        for _ in 0..opts.iterations {
            let g = overlap_gradient(spec, &theta, target)?;
            for (t, d) in theta.iter_mut().zip(&g) {
                *t -= opts.step * d;
            }
        }
        best = best.min(overlap_cost(spec, &theta, target)?);
    }
    Ok(best)
}

/// Fits every candidate to every target and ranks by mean final cost.
pub fn fit_ansatz(candidates: &[AnsatzSpec], targets: &[Vec<C64>], opts: &FitOptions) -> Result<Vec<FitResult>> {
    if targets.is_empty() {
        return Err(Error::validation("fitting needs at least one reference target"));
    }
    let mut out: Vec<FitResult> = candidates
        .par_iter()
        .enumerate()
        .map(|(ci, spec)| {
            let costs = targets
                .iter()
                .enumerate()
                .map(|(k, t)| fit_one(spec, t, opts, rng::derive(rng::derive(opts.seed, ci as u64), k as u64)))
                .collect::<Result<Vec<f64>>>()?;
            Ok(FitResult {
                row: spec.row.unwrap_or(0),
                layers: spec.n_layers,
                params: spec.param_count(),
                mean_cost: costs.iter().sum::<f64>() / costs.len() as f64,
                costs,
            })
        })
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| a.mean_cost.total_cmp(&b.mean_cost));
    Ok(out)
}

/// Ranked candidates for both ansätze.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub primal: Vec<FitResult>,
    pub dual: Vec<FitResult>,
}

/// Fits the configured candidate lists to the reference solutions of the
/// configured instances, in the permuted, padded layout the solver uses.
pub fn run_fit(cfg: &ExperimentConfig) -> Result<FitReport> {
    cfg.validate()?;
    if cfg.reference.is_none() {
        return Err(Error::validation("fitting needs a reference (a JSON path or \"oracle\")"));
    }
    let base = base_case(cfg)?;
    let instances = generate_instances(&base, cfg.instances.count, cfg.instances.scale, rng::derive(cfg.seed, 0));
    let topology = prepare(&base, cfg.rcm_runs, rng::derive(cfg.seed, 1))?;
    let reference = load_references(cfg, &instances)?.expect("reference configured");
    let (n_pad, m_pad) = (topology.stats.n_padded, topology.stats.m_padded);
    let mut primal_targets = Vec::new();
    let mut dual_targets = Vec::new();
    for r in reference.instances.iter().take(instances.len()) {
        let mut v = r.voltage_vector().ok_or_else(|| Error::validation("reference instance lacks a voltage vector"))?;
        v.resize(n_pad, C64::from(0.0));
        primal_targets.push(topology.permutation.apply(&v));
        let mut l = r.lambda_full.clone().ok_or_else(|| Error::validation("reference instance lacks the full multiplier vector"))?;
        l.resize(m_pad, 0.0);
        dual_targets.push(dual_target(&l)?);
    }
    let opts = FitOptions { iterations: cfg.fit.iterations, step: cfg.fit.step, restarts: cfg.fit.restarts, seed: rng::derive(cfg.seed, 3) };
    let specs = |list: &[(u8, usize)], nq: usize| -> Result<Vec<AnsatzSpec>> {
        list.iter().map(|&(row, l)| AnsatzSpec::from_table(row, l, nq)).collect()
    };
    let nq = n_pad.trailing_zeros() as usize;
    let mq = m_pad.trailing_zeros() as usize;
    Ok(FitReport {
        primal: fit_ansatz(&specs(&cfg.fit.primal, nq)?, &primal_targets, &opts)?,
        dual: fit_ansatz(&specs(&cfg.fit.dual, mq)?, &dual_targets, &opts)?,
    })
}

/// `√(λ/Σλ)` as a real amplitude vector.
pub fn dual_target(lambda: &[f64]) -> Result<Vec<C64>> {
    let total: f64 = lambda.iter().sum();
    if !(total > 0.0) || lambda.iter().any(|&l| l < 0.0) {
        return Err(Error::validation("dual target needs nonnegative multipliers with a positive sum"));
    }
    Ok(lambda.iter().map(|&l| C64::from((l / total).sqrt())).collect())
}

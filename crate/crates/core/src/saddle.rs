//! Saddle-point iterations.
//!
//! The quantum engines work on `z = [θ; α; φ; β]` and the signed field
//! `g(z) = [∇θ𝓛; ∂α𝓛; −∇φ𝓛; −∂β𝓛]`, so both updates are plain descent on `g`:
//!
//! - primal-dual: `z' = z − μ∘g(z)`, all blocks from the same `z`;
//! - extragradient: `z̄ = z − 2μ∘g(z)`, then `z' = z − μ∘g(z̄)`
//!   (or equal steps with [`EgVariant::Symmetric`]).
//!
//! `α` and `β` are projected onto `[0, ∞)` after every update, including the
//! extrapolated point. The classical baselines do the same on `(v, λ)` of the
//! raw QCQP; classical PD updates `λ` at the new `v`.

use std::io::Write;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::grid::QcqpProblem;
use crate::linalg::{self, SparseMatrix, C64};
use crate::variational::{self, DualPoint, EvalMode, LagrangianContext, PrimalPoint};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddlePointState {
    pub theta: Vec<f64>,
    pub alpha: f64,
    pub phi: Vec<f64>,
    pub beta: f64,
    pub iteration: usize,
}

impl SaddlePointState {
    pub fn new(primal: PrimalPoint, dual: DualPoint) -> Self {
        SaddlePointState { theta: primal.theta, alpha: primal.alpha, phi: dual.phi, beta: dual.beta, iteration: 0 }
    }

    pub fn primal(&self) -> PrimalPoint {
        PrimalPoint { theta: self.theta.clone(), alpha: self.alpha }
    }

    pub fn dual(&self) -> DualPoint {
        DualPoint { phi: self.phi.clone(), beta: self.beta }
    }

    /// Stacked `[θ; α; φ; β]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut z = self.theta.clone();
        z.push(self.alpha);
        z.extend_from_slice(&self.phi);
        z.push(self.beta);
        z
    }

    /// Distance `‖z − other‖` over all four blocks.
    pub fn distance(&self, other: &SaddlePointState) -> f64 {
        let (a, b) = (self.to_vec(), other.to_vec());
        a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    fn step(&self, g: &FieldValue, mu: &StepSizes, scale: f64) -> SaddlePointState {
        let p = self.theta.len();
        let q = self.phi.len();
        let theta = self.theta.iter().zip(&g.field[..p]).map(|(x, d)| x - scale * mu.theta * d).collect();
        let alpha = (self.alpha - scale * mu.alpha * g.field[p]).max(0.0);
        let phi = self.phi.iter().zip(&g.field[p + 1..p + 1 + q]).map(|(x, d)| x - scale * mu.phi * d).collect();
        let beta = (self.beta - scale * mu.beta * g.field[p + 1 + q]).max(0.0);
        SaddlePointState { theta, alpha, phi, beta, iteration: self.iteration }
    }
}

/// Default initialization: angles uniform on `[0, 2π)`, `α = √N`, `β = 2|𝒩_ℓ|`.
pub fn initial_state(p: usize, q: usize, n_buses: usize, n_load_buses: usize, seed: u64) -> SaddlePointState {
    let theta = crate::statevector::random_params(p, rng::derive(seed, 0));
    let phi = crate::statevector::random_params(q, rng::derive(seed, 1));
    SaddlePointState { theta, alpha: (n_buses as f64).sqrt(), phi, beta: 2.0 * n_load_buses as f64, iteration: 0 }
}

/// A (possibly stochastic) signed gradient field over `[θ; α; φ; β]`.
pub trait SaddleField {
    /// `(P, Q)`.
    fn dims(&self) -> (usize, usize);
    fn eval(&self, z: &SaddlePointState, seed: u64) -> Result<FieldValue>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldValue {
    /// `g(z)`, length `P + Q + 2`.
    pub field: Vec<f64>,
    pub lagrangian: f64,
    pub shots: u64,
}

impl FieldValue {
    pub fn norm(&self) -> f64 {
        linalg::real_norm(&self.field)
    }
}

/// The doubly variational Lagrangian as a [`SaddleField`].
pub struct QuantumField<'a> {
    pub ctx: &'a LagrangianContext,
    pub mode: EvalMode,
}

impl SaddleField for QuantumField<'_> {
    fn dims(&self) -> (usize, usize) {
        (self.ctx.p(), self.ctx.q())
    }

    fn eval(&self, z: &SaddlePointState, seed: u64) -> Result<FieldValue> {
        let g = variational::grad(self.ctx, &z.primal(), &z.dual(), self.mode, seed)?;
        Ok(FieldValue { field: g.field(), lagrangian: g.lagrangian, shots: g.count.shots })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Pd,
    #[default]
    Eg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EgVariant {
    /// `2μ` extrapolation, `μ` update.
    #[default]
    Literal,
    /// `μ` for both stages.
    Symmetric,
}

impl EgVariant {
    fn extrapolation(self) -> f64 {
        match self {
            EgVariant::Literal => 2.0,
            EgVariant::Symmetric => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Constant,
    ExponentialDecay,
    /// Constant `1/(2√2·L)`; build with [`StepSchedule::lipschitz_safe`].
    LipschitzSafe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRate {
    pub base: f64,
    #[serde(default = "unit")]
    pub decay: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub theta: f64,
    pub alpha: f64,
    pub phi: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub kind: ScheduleKind,
    pub base: f64,
    #[serde(default = "unit")]
    pub decay: f64,
    #[serde(default)]
    pub theta: Option<BlockRate>,
    #[serde(default)]
    pub alpha: Option<BlockRate>,
    #[serde(default)]
    pub phi: Option<BlockRate>,
    #[serde(default)]
    pub beta: Option<BlockRate>,
}

impl StepSchedule {
    pub fn constant(mu: f64) -> Self {
        StepSchedule { kind: ScheduleKind::Constant, base: mu, decay: 1.0, theta: None, alpha: None, phi: None, beta: None }
    }

    pub fn exponential(base: f64, decay: f64) -> Self {
        StepSchedule { kind: ScheduleKind::ExponentialDecay, decay, ..Self::constant(base) }
    }

    /// `μ = 1/(2√2·L)` on every block.
    pub fn lipschitz_safe(lipschitz: f64) -> Self {
        StepSchedule { kind: ScheduleKind::LipschitzSafe, ..Self::constant(1.0 / (2.0 * std::f64::consts::SQRT_2 * lipschitz)) }
    }

    /// `μθ = 0.015·0.99985ᵗ`, `μφ = 0.01·0.99985ᵗ`, `μα = μβ = 10⁻⁵·0.999ᵗ`.
    pub fn default_quantum() -> Self {
        StepSchedule {
            theta: Some(BlockRate { base: 0.015, decay: 0.99985 }),
            phi: Some(BlockRate { base: 0.01, decay: 0.99985 }),
            alpha: Some(BlockRate { base: 1e-5, decay: 0.999 }),
            beta: Some(BlockRate { base: 1e-5, decay: 0.999 }),
            ..Self::exponential(0.015, 0.99985)
        }
    }

    /// `μ = 10⁻³·0.9999ᵗ` for both `v` and `λ`.
    pub fn default_classical() -> Self {
        Self::exponential(1e-3, 0.9999)
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [Some(BlockRate { base: self.base, decay: self.decay }), self.theta, self.alpha, self.phi, self.beta];
        for r in rates.into_iter().flatten() {
            if !(r.base > 0.0 && r.base.is_finite() && r.decay > 0.0 && r.decay.is_finite()) {
                return Err(Error::validation(format!("step sizes must be positive, got base {} decay {}", r.base, r.decay)));
            }
        }
        Ok(())
    }

    fn rate(&self, block: Option<BlockRate>, t: usize) -> f64 {
        let r = block.unwrap_or(BlockRate { base: self.base, decay: self.decay });
        match self.kind {
            ScheduleKind::ExponentialDecay => r.base * r.decay.powi(t.min(i32::MAX as usize) as i32),
            ScheduleKind::Constant | ScheduleKind::LipschitzSafe => r.base,
        }
    }

    pub fn at(&self, t: usize) -> StepSizes {
        StepSizes {
            theta: self.rate(self.theta, t),
            alpha: self.rate(self.alpha, t),
            phi: self.rate(self.phi, t),
            beta: self.rate(self.beta, t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopRule {
    /// Stop once `‖θᵗ − θᵗ⁻¹‖ ≤ theta_tol` and `‖φᵗ − φᵗ⁻¹‖ ≤ phi_tol`.
    pub theta_tol: f64,
    pub phi_tol: f64,
    pub max_iters: usize,
    /// Optionally also stop once `‖g(zᵗ)‖` falls below this.
    pub grad_tol: Option<f64>,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { theta_tol: 1e-6, phi_tol: 1e-6, max_iters: 50_000, grad_tol: None }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_tol > 0.0 && self.phi_tol > 0.0) || self.grad_tol.is_some_and(|g| g <= 0.0) {
            return Err(Error::validation("stop tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub method: Method,
    #[serde(default)]
    pub eg_variant: EgVariant,
    /// Abort once `|𝓛|` exceeds this.
    pub divergence_ceiling: f64,
    /// Keep one trajectory row every `record_every` iterations (0 = none).
    pub record_every: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { method: Method::Eg, eg_variant: EgVariant::Literal, divergence_ceiling: 1e9, record_every: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub iteration: usize,
    pub lagrangian: f64,
    pub grad_theta: f64,
    pub grad_alpha: f64,
    pub grad_phi: f64,
    pub grad_beta: f64,
    pub grad_norm: f64,
    pub alpha: f64,
    pub beta: f64,
    pub shots: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub state: SaddlePointState,
    pub trajectory: Vec<TrajectoryRow>,
    /// Stop rule met before `max_iters`.
    pub converged: bool,
    pub iterations: usize,
    pub total_shots: u64,
    /// `‖g‖` at the final state (last evaluated field for sampled runs).
    pub final_grad_norm: f64,
    pub final_lagrangian: f64,
}

/// One primal-dual step. Returns the new state and the field at `z`.
pub fn pd_step(field: &dyn SaddleField, z: &SaddlePointState, schedule: &StepSchedule, seed: u64) -> Result<(SaddlePointState, FieldValue)> {
    let g = field.eval(z, seed)?;
    let mut next = z.step(&g, &schedule.at(z.iteration), 1.0);
    next.iteration = z.iteration + 1;
    Ok((next, g))
}

/// One extragradient step: the extrapolated point `z̄`, the fields at `z`
/// and `z̄` (independent seeds), and the updated state.
#[derive(Debug, Clone, PartialEq)]
pub struct EgStep {
    pub next: SaddlePointState,
    pub bar: SaddlePointState,
    pub g: FieldValue,
    pub g_bar: FieldValue,
}

pub fn eg_step(field: &dyn SaddleField, z: &SaddlePointState, schedule: &StepSchedule, variant: EgVariant, seed: u64) -> Result<EgStep> {
    let mu = schedule.at(z.iteration);
    let g = field.eval(z, rng::derive(seed, 0))?;
    let bar = z.step(&g, &mu, variant.extrapolation());
    let g_bar = field.eval(&bar, rng::derive(seed, 1))?;
    let mut next = z.step(&g_bar, &mu, 1.0);
    next.iteration = z.iteration + 1;
    Ok(EgStep { next, bar, g, g_bar })
}

fn block_norms(g: &FieldValue, p: usize, q: usize) -> (f64, f64, f64, f64) {
    let f = &g.field;
    (linalg::real_norm(&f[..p]), f[p].abs(), linalg::real_norm(&f[p + 1..p + 1 + q]), f[p + 1 + q].abs())
}

fn delta(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Iterates until the stop rule fires. Deterministic for a given seed.
///
/// PD reports and returns its iterates `zᵗ`. EG reports and returns the
/// extrapolated points `z̄ᵗ`: those are the iterates its convergence
/// guarantee covers, and `zᵗ` itself can stall at points where `z̄ᵗ` is
/// stationary but `zᵗ` is not.
pub fn run(
    field: &dyn SaddleField,
    init: SaddlePointState,
    schedule: &StepSchedule,
    stop: &StopRule,
    options: &RunOptions,
    seed: u64,
) -> Result<RunOutcome> {
    schedule.validate()?;
    stop.validate()?;
    let (p, q) = field.dims();
    if init.theta.len() != p || init.phi.len() != q {
        return Err(Error::dimension(format!("state has {}/{} parameters, field expects {p}/{q}", init.theta.len(), init.phi.len())));
    }
    let mut z = init;
    let mut trajectory = Vec::new();
    let mut total_shots = 0;
    let mut converged = false;
    // Last monitored point and the field measured there.
    let mut last: Option<(SaddlePointState, FieldValue)> = None;
    let mut done = 0;
    while done < stop.max_iters {
        let step_seed = rng::derive(seed, z.iteration as u64);
        let (next, watched, g, shots) = match options.method {
            Method::Pd => {
                let (n, g) = pd_step(field, &z, schedule, step_seed)?;
                let shots = g.shots;
                (n, z.clone(), g, shots)
            }
            Method::Eg => {
                let s = eg_step(field, &z, schedule, options.eg_variant, step_seed)?;
                let shots = s.g.shots + s.g_bar.shots;
                let mut bar = s.bar;
                bar.iteration = z.iteration;
                (s.next, bar, s.g_bar, shots)
            }
        };
        if !g.lagrangian.is_finite() || g.lagrangian.abs() > options.divergence_ceiling || !next.to_vec().iter().all(|x| x.is_finite()) {
            return Err(Error::Divergence { iteration: z.iteration, value: g.lagrangian });
        }
        total_shots += shots;
        if options.record_every > 0 && z.iteration % options.record_every == 0 {
            let (gt, ga, gp, gb) = block_norms(&g, p, q);
            trajectory.push(TrajectoryRow {
                iteration: z.iteration,
                lagrangian: g.lagrangian,
                grad_theta: gt,
                grad_alpha: ga,
                grad_phi: gp,
                grad_beta: gb,
                grad_norm: g.norm(),
                alpha: watched.alpha,
                beta: watched.beta,
                shots: total_shots,
            });
        }
        done += 1;
        let small_steps = delta(&next.theta, &z.theta) <= stop.theta_tol && delta(&next.phi, &z.phi) <= stop.phi_tol;
        let small_grad = stop.grad_tol.is_some_and(|tol| g.norm() < tol);
        z = next;
        last = Some((watched, g));
        if small_grad || (small_steps && stop.grad_tol.is_none()) {
            converged = true;
            break;
        }
    }
    let (state, final_grad_norm, final_lagrangian) = match last {
        Some((w, g)) if converged && stop.grad_tol.is_some() => (w, g.norm(), g.lagrangian),
        Some((w, _)) if options.method == Method::Eg => {
            let g = field.eval(&w, rng::derive(seed, u64::MAX))?;
            (w, g.norm(), g.lagrangian)
        }
        _ => {
            let g = field.eval(&z, rng::derive(seed, u64::MAX))?;
            (z, g.norm(), g.lagrangian)
        }
    };
    Ok(RunOutcome { state, trajectory, converged, iterations: done, total_shots, final_grad_norm, final_lagrangian })
}

pub fn write_trajectory(path: impl AsRef<Path>, rows: &[TrajectoryRow]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Header-only-safe trajectory CSV as a string.
pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let mut out = Vec::new();
    writeln!(out, "iteration,lagrangian,grad_theta,grad_alpha,grad_phi,grad_beta,grad_norm,alpha,beta,shots").unwrap();
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    out.extend(w.into_inner().expect("in-memory write"));
    String::from_utf8(out).expect("utf8")
}

// ---------------------------------------------------------------------------
// Classical baselines on the raw QCQP

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub v: Vec<C64>,
    pub lambda: Vec<f64>,
    pub iteration: usize,
}

impl ClassicalState {
    /// Flat voltage profile and `λ = |N(0,1)|·2|𝒩_ℓ|`.
    pub fn initial(problem: &QcqpProblem, n_load_buses: usize, seed: u64) -> Self {
        let mut r = rng::rng(seed);
        let scale = 2.0 * n_load_buses as f64;
        let lambda = (0..problem.m())
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut r);
                z.abs() * scale
            })
            .collect();
        ClassicalState { v: vec![C64::from(1.0); problem.dim()], lambda, iteration: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSteps {
    pub mu_v: f64,
    pub mu_lambda: f64,
}

impl StepSchedule {
    /// `μ_v` from the θ rate, `μ_λ` from the φ rate.
    pub fn classical_at(&self, t: usize) -> ClassicalSteps {
        let s = self.at(t);
        ClassicalSteps { mu_v: s.theta, mu_lambda: s.phi }
    }
}

fn hessian(problem: &QcqpProblem, lambda: &[f64]) -> SparseMatrix {
    SparseMatrix::weighted_sum(
        problem.dim(),
        std::iter::once((1.0, &problem.m0)).chain(lambda.iter().copied().zip(problem.constraints.iter().map(|c| &c.matrix))),
    )
}

/// `∇v𝓛 = 2(M₀ + Σλₘ Mₘ)v`.
pub fn classical_grad_v(problem: &QcqpProblem, v: &[C64], lambda: &[f64]) -> Vec<C64> {
    hessian(problem, lambda).matvec(v).into_iter().map(|x| 2.0 * x).collect()
}

/// `∂𝓛/∂λₘ = v†Mₘv − bₘ`.
pub fn classical_grad_lambda(problem: &QcqpProblem, v: &[C64]) -> Vec<f64> {
    problem.residuals(v)
}

fn check_classical(problem: &QcqpProblem, s: &ClassicalState) -> Result<()> {
    if s.v.len() != problem.dim() || s.lambda.len() != problem.m() {
        return Err(Error::dimension(format!(
            "state has |v| = {}, |λ| = {}; problem has N = {}, M = {}",
            s.v.len(),
            s.lambda.len(),
            problem.dim(),
            problem.m()
        )));
    }
    Ok(())
}

/// Gauss-Seidel PD: descend `v`, then projected ascent on `λ` at the new `v`.
pub fn classical_pd_step(problem: &QcqpProblem, s: &ClassicalState, steps: ClassicalSteps) -> Result<ClassicalState> {
    check_classical(problem, s)?;
    let gv = classical_grad_v(problem, &s.v, &s.lambda);
    let v: Vec<C64> = s.v.iter().zip(&gv).map(|(x, g)| x - steps.mu_v * g).collect();
    let gl = classical_grad_lambda(problem, &v);
    let lambda = s.lambda.iter().zip(&gl).map(|(l, g)| (l + steps.mu_lambda * g).max(0.0)).collect();
    Ok(ClassicalState { v, lambda, iteration: s.iteration + 1 })
}

fn classical_move(problem: &QcqpProblem, base: &ClassicalState, at: &ClassicalState, steps: ClassicalSteps, scale: f64) -> ClassicalState {
    let gv = classical_grad_v(problem, &at.v, &at.lambda);
    let gl = classical_grad_lambda(problem, &at.v);
    ClassicalState {
        v: base.v.iter().zip(&gv).map(|(x, g)| x - scale * steps.mu_v * g).collect(),
        lambda: base.lambda.iter().zip(&gl).map(|(l, g)| (l + scale * steps.mu_lambda * g).max(0.0)).collect(),
        iteration: base.iteration,
    }
}

/// Extragradient on the stacked `(v, λ)` with field `[∇v𝓛; −∇λ𝓛]`.
pub fn classical_eg_step(problem: &QcqpProblem, s: &ClassicalState, steps: ClassicalSteps, variant: EgVariant) -> Result<ClassicalState> {
    check_classical(problem, s)?;
    let bar = classical_move(problem, s, s, steps, variant.extrapolation());
    let mut next = classical_move(problem, s, &bar, steps, 1.0);
    next.iteration = s.iteration + 1;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalOutcome {
    pub state: ClassicalState,
    pub trajectory: Vec<TrajectoryRow>,
    pub converged: bool,
    pub iterations: usize,
    pub final_lagrangian: f64,
}

/// Classical PD/EG loop. The stop rule reads `theta_tol` as the `‖Δv‖`
/// tolerance and `phi_tol` as the `‖Δλ‖` tolerance.
pub fn run_classical(
    problem: &QcqpProblem,
    init: ClassicalState,
    schedule: &StepSchedule,
    stop: &StopRule,
    options: &RunOptions,
) -> Result<ClassicalOutcome> {
    schedule.validate()?;
    stop.validate()?;
    check_classical(problem, &init)?;
    let mut s = init;
    let mut trajectory = Vec::new();
    let mut converged = false;
    let mut done = 0;
    while done < stop.max_iters {
        let steps = schedule.classical_at(s.iteration);
        let next = match options.method {
            Method::Pd => classical_pd_step(problem, &s, steps)?,
            Method::Eg => classical_eg_step(problem, &s, steps, options.eg_variant)?,
        };
        let l = problem.lagrangian(&s.v, &s.lambda);
        if !l.is_finite() || l.abs() > options.divergence_ceiling {
            return Err(Error::Divergence { iteration: s.iteration, value: l });
        }
        if options.record_every > 0 && s.iteration % options.record_every == 0 {
            let gv = linalg::norm(&classical_grad_v(problem, &s.v, &s.lambda));
            let gl = linalg::real_norm(&classical_grad_lambda(problem, &s.v));
            trajectory.push(TrajectoryRow {
                iteration: s.iteration,
                lagrangian: l,
                grad_theta: gv,
                grad_alpha: 0.0,
                grad_phi: gl,
                grad_beta: 0.0,
                grad_norm: gv.hypot(gl),
                alpha: linalg::norm(&s.v),
                beta: s.lambda.iter().sum::<f64>().sqrt(),
                shots: 0,
            });
        }
        done += 1;
        let dv = s.v.iter().zip(&next.v).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let dl = delta(&s.lambda, &next.lambda);
        s = next;
        if dv <= stop.theta_tol && dl <= stop.phi_tol {
            converged = true;
            break;
        }
    }
    let final_lagrangian = problem.lagrangian(&s.v, &s.lambda);
    Ok(ClassicalOutcome { state: s, trajectory, converged, iterations: done, final_lagrangian })
}

//! The doubly variational Lagrangian
//!
//! ```text
//! v(θ, α) = α|ψ(θ)⟩,   λₘ(φ, β) = β²|ξₘ(φ)|²
//! 𝓛 = α²F₀(θ) + α²β²F(θ, φ) − β²G(φ)
//! F₀ = ⟨ψ|M₀|ψ⟩,  F = Σₘ |ξₘ|²⟨ψ|Mₘ|ψ⟩,  G = Σₘ bₘ|ξₘ|²
//! ```
//!
//! and its gradient field `g = [∇θ𝓛; ∂α𝓛; −∇φ𝓛; −∂β𝓛]`.
//!
//! Exact mode evaluates every term on the statevector. Sampled mode uses
//! colour-decomposed basis measurements with `shots` samples per rotated
//! circuit; `F` is measured in two steps (draw `m` from the dual PMF, then
//! measure the primal state in the rotated basis of colour `c`), so one
//! sample of piece `c` reads `Λₘᶜ[i]`. Every estimate in one gradient draws
//! from its own derived seed, so the terms are independent.

use std::f64::consts::FRAC_PI_2;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::QcqpProblem;
use crate::linalg::{self, SparseMatrix, C64};
use crate::statevector::{self, prepare, AnsatzSpec, BasisSampler, QuantumState};
use crate::xbm::{self, ColorDecomposition, JointDecomposition};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalPoint {
    pub theta: Vec<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPoint {
    pub phi: Vec<f64>,
    pub beta: f64,
}

/// How exact gradients are computed. Both give the same numbers; the
/// adjoint sweep is `O(P)` cheaper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientBackend {
    Psr,
    #[default]
    Adjoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum EvalMode {
    Exact,
    Sampled {
        /// Samples per rotated circuit.
        shots: usize,
        /// Primal draws per dual draw in the two-step `F` estimator.
        #[serde(default = "one")]
        primal_per_dual: usize,
    },
}

fn one() -> usize {
    1
}

impl EvalMode {
    pub fn sampled(shots: usize) -> Self {
        EvalMode::Sampled { shots, primal_per_dual: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EvalMode::Sampled { shots, primal_per_dual } if shots == 0 || primal_per_dual == 0 => {
                Err(Error::validation("sampled mode needs at least one shot"))
            }
            _ => Ok(()),
        }
    }
}

/// The three Lagrangian terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Terms {
    pub f0: f64,
    pub f: f64,
    pub g: f64,
}

impl Terms {
    pub fn lagrangian(&self, alpha: f64, beta: f64) -> f64 {
        let (a2, b2) = (alpha * alpha, beta * beta);
        a2 * self.f0 + a2 * b2 * self.f - b2 * self.g
    }
}

/// Circuit bookkeeping for one gradient evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitCount {
    /// `(2P + 1)·pieces` rotated primal circuits.
    pub primal_circuits: u64,
    /// `2Q + 1` dual circuits.
    pub dual_circuits: u64,
    /// Measurement samples spent (0 in exact mode).
    pub shots: u64,
}

impl std::ops::AddAssign for CircuitCount {
    fn add_assign(&mut self, o: Self) {
        self.primal_circuits += o.primal_circuits;
        self.dual_circuits += o.dual_circuits;
        self.shots += o.shots;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradient {
    pub theta: Vec<f64>,
    pub alpha: f64,
    pub phi: Vec<f64>,
    pub beta: f64,
    /// `𝓛` at the point (a sample estimate in sampled mode).
    pub lagrangian: f64,
    pub count: CircuitCount,
}

impl Gradient {
    /// The signed field `[∇θ; ∂α; −∇φ; −∂β]`.
    pub fn field(&self) -> Vec<f64> {
        let mut g = self.theta.clone();
        g.push(self.alpha);
        g.extend(self.phi.iter().map(|x| -x));
        g.push(-self.beta);
        g
    }
}

/// Everything needed to evaluate the Lagrangian of one (padded, possibly
/// permuted) problem under a primal/dual ansatz pair.
#[derive(Debug, Clone)]
pub struct LagrangianContext {
    pub problem: QcqpProblem,
    pub primal_spec: AnsatzSpec,
    pub dual_spec: AnsatzSpec,
    pub m0_decomposition: ColorDecomposition,
    pub joint: JointDecomposition,
    pub s_diag: Vec<f64>,
    pub backend: GradientBackend,
}

impl LagrangianContext {
    pub fn new(problem: QcqpProblem, primal_spec: AnsatzSpec, dual_spec: AnsatzSpec) -> Result<Self> {
        problem.validate()?;
        if primal_spec.dim() != problem.dim() {
            return Err(Error::dimension(format!(
                "primal ansatz acts on {} amplitudes but the problem has dimension {}",
                primal_spec.dim(),
                problem.dim()
            )));
        }
        if dual_spec.dim() != problem.m() {
            return Err(Error::dimension(format!(
                "dual ansatz acts on {} amplitudes but the problem has {} constraints",
                dual_spec.dim(),
                problem.m()
            )));
        }
        let m0_decomposition = xbm::decompose(&problem.m0)?;
        let joint = JointDecomposition::new(problem.constraints.iter().map(|c| &c.matrix))?;
        let s_diag = problem.bounds();
        Ok(LagrangianContext { problem, primal_spec, dual_spec, m0_decomposition, joint, s_diag, backend: GradientBackend::default() })
    }

    pub fn with_backend(mut self, backend: GradientBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn p(&self) -> usize {
        self.primal_spec.param_count()
    }

    pub fn q(&self) -> usize {
        self.dual_spec.param_count()
    }

    /// Number of distinct rotated primal circuits per evaluation: the pieces
    /// of `M₀` and of the block observable, merged by `(colour, part)`.
    pub fn piece_count(&self) -> usize {
        let mut keys: Vec<_> = self.m0_decomposition.pieces.iter().map(|p| (p.color, p.part)).collect();
        keys.extend(self.joint.pieces.iter().map(|p| (p.color, p.part)));
        keys.sort();
        keys.dedup();
        keys.len()
    }

    fn count(&self, shots: usize) -> CircuitCount {
        let primal = ((2 * self.p() + 1) * self.piece_count()) as u64;
        let dual = (2 * self.q() + 1) as u64;
        CircuitCount { primal_circuits: primal, dual_circuits: dual, shots: (primal + dual) * shots as u64 }
    }

    fn check(&self, p: &PrimalPoint, d: &DualPoint) -> Result<()> {
        if p.theta.len() != self.p() || d.phi.len() != self.q() {
            return Err(Error::dimension(format!(
                "expected {} primal and {} dual parameters, got {} and {}",
                self.p(),
                self.q(),
                p.theta.len(),
                d.phi.len()
            )));
        }
        Ok(())
    }

    pub fn primal_state(&self, theta: &[f64]) -> Result<QuantumState> {
        prepare(&self.primal_spec, theta)
    }

    pub fn dual_state(&self, phi: &[f64]) -> Result<QuantumState> {
        prepare(&self.dual_spec, phi)
    }

    /// `F_m(θ) = ⟨ψ|Mₘ|ψ⟩` for every constraint.
    pub fn constraint_expectations(&self, psi: &QuantumState) -> Vec<f64> {
        self.problem.constraints.iter().map(|c| c.matrix.expectation(psi.amplitudes())).collect()
    }

    /// `W = Σₘ wₘ Mₘ`.
    pub fn weighted_constraints(&self, w: &[f64]) -> SparseMatrix {
        SparseMatrix::weighted_sum(self.problem.dim(), w.iter().copied().zip(self.problem.constraints.iter().map(|c| &c.matrix)))
    }
}

/// `α·ψ(θ)`.
pub fn primal_vector(ctx: &LagrangianContext, p: &PrimalPoint) -> Result<Vec<C64>> {
    Ok(ctx.primal_state(&p.theta)?.into_amplitudes().into_iter().map(|a| a * p.alpha).collect())
}

/// `λₘ = β²|ξₘ(φ)|²`.
pub fn dual_vector(ctx: &LagrangianContext, d: &DualPoint) -> Result<Vec<f64>> {
    let b2 = d.beta * d.beta;
    Ok(ctx.dual_state(&d.phi)?.probabilities().into_iter().map(|q| b2 * q).collect())
}

pub fn eval_terms_exact(ctx: &LagrangianContext, p: &PrimalPoint, d: &DualPoint) -> Result<Terms> {
    ctx.check(p, d)?;
    let psi = ctx.primal_state(&p.theta)?;
    let xi = ctx.dual_state(&d.phi)?.probabilities();
    Ok(terms_from_states(ctx, &psi, &xi))
}

fn terms_from_states(ctx: &LagrangianContext, psi: &QuantumState, xi: &[f64]) -> Terms {
    let fm = ctx.constraint_expectations(psi);
    Terms {
        f0: ctx.problem.m0.expectation(psi.amplitudes()),
        f: xi.iter().zip(&fm).map(|(x, f)| x * f).sum(),
        g: xi.iter().zip(&ctx.s_diag).map(|(x, b)| x * b).sum(),
    }
}

/// `F` through the block observable `Σₘ eₘeₘᵀ ⊗ Mₘ` on `|ξ⟩ ⊗ |ψ⟩`
/// (index `m·N + i`). Materializes an `MN × MN` matrix: tiny problems only.
pub fn f_kronecker(ctx: &LagrangianContext, p: &PrimalPoint, d: &DualPoint) -> Result<f64> {
    ctx.check(p, d)?;
    let psi = ctx.primal_state(&p.theta)?;
    let xi = ctx.dual_state(&d.phi)?;
    let n = psi.dim();
    let big = SparseMatrix::from_triplets(
        n * ctx.problem.m(),
        ctx.problem
            .constraints
            .iter()
            .enumerate()
            .flat_map(|(m, c)| c.matrix.entries().iter().map(move |&(r, col, z)| (m * n + r, m * n + col, z))),
    );
    let joint: Vec<C64> = xi.amplitudes().iter().flat_map(|x| psi.amplitudes().iter().map(move |a| x * a)).collect();
    Ok(big.expectation(&joint))
}

/// Sample estimate of `F₀`.
pub fn estimate_f0(ctx: &LagrangianContext, psi: &QuantumState, shots: usize, seed: u64) -> f64 {
    if ctx.m0_decomposition.pieces.is_empty() {
        return 0.0;
    }
    xbm::estimate_expectation(psi, &ctx.m0_decomposition, shots, seed).expect("consistent sizes").0
}

/// Sample estimate of `G` from `shots` dual basis measurements.
pub fn estimate_g(ctx: &LagrangianContext, xi: &QuantumState, shots: usize, seed: u64) -> f64 {
    let counts = statevector::sample_basis(xi, shots, seed);
    counts.iter().zip(&ctx.s_diag).map(|(&n, &b)| n as f64 * b).sum::<f64>() / shots as f64
}

/// Two-step sample estimate of `F`.
pub fn estimate_f(ctx: &LagrangianContext, psi: &QuantumState, xi: &QuantumState, shots: usize, primal_per_dual: usize, seed: u64) -> f64 {
    let dual = BasisSampler::of_state(xi);
    ctx.joint
        .pieces
        .par_iter()
        .enumerate()
        .map(|(k, piece)| {
            let mut rotated = psi.clone();
            for g in piece.circuit(ctx.joint.n_qubits) {
                rotated.apply(&g).expect("sizes match");
            }
            let primal = BasisSampler::of_state(&rotated);
            let mut r = rng::derived_rng(seed, k as u64);
            let mut acc = 0.0;
            for _ in 0..shots {
                let m = dual.draw(&mut r);
                let diag = piece.members.binary_search_by_key(&m, |(mm, _)| *mm).ok().map(|i| &piece.members[i].1);
                let mut inner = 0.0;
                for _ in 0..primal_per_dual {
                    let i = primal.draw(&mut r);
                    inner += diag.map_or(0.0, |d| d[i]);
                }
                acc += inner / primal_per_dual as f64;
            }
            acc / shots as f64
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Sampled terms at one point, each from an independent stream.
pub fn eval_terms_sampled(ctx: &LagrangianContext, p: &PrimalPoint, d: &DualPoint, shots: usize, primal_per_dual: usize, seed: u64) -> Result<Terms> {
    ctx.check(p, d)?;
    if shots == 0 || primal_per_dual == 0 {
        return Err(Error::validation("sampled evaluation needs at least one shot"));
    }
    let psi = ctx.primal_state(&p.theta)?;
    let xi = ctx.dual_state(&d.phi)?;
    Ok(Terms {
        f0: estimate_f0(ctx, &psi, shots, rng::derive(seed, 0)),
        f: estimate_f(ctx, &psi, &xi, shots, primal_per_dual, rng::derive(seed, 1)),
        g: estimate_g(ctx, &xi, shots, rng::derive(seed, 2)),
    })
}

pub fn lagrangian(ctx: &LagrangianContext, p: &PrimalPoint, d: &DualPoint, mode: EvalMode, seed: u64) -> Result<f64> {
    let terms = match mode {
        EvalMode::Exact => eval_terms_exact(ctx, p, d)?,
        EvalMode::Sampled { shots, primal_per_dual } => eval_terms_sampled(ctx, p, d, shots, primal_per_dual, seed)?,
    };
    Ok(terms.lagrangian(p.alpha, d.beta))
}

pub fn grad(ctx: &LagrangianContext, p: &PrimalPoint, d: &DualPoint, mode: EvalMode, seed: u64) -> Result<Gradient> {
    ctx.check(p, d)?;
    mode.validate()?;
    match mode {
        EvalMode::Exact => grad_exact(ctx, p, d),
        EvalMode::Sampled { shots, primal_per_dual } => grad_sampled(ctx, p, d, shots, primal_per_dual, seed),
    }
}

/// Exact gradient together with the terms at the point.
pub fn grad_exact_with_terms(ctx: &LagrangianContext, p: &PrimalPoint, d: &DualPoint) -> Result<(Gradient, Terms)> {
    ctx.check(p, d)?;
    let (a2, b2) = (p.alpha * p.alpha, d.beta * d.beta);
    let psi = ctx.primal_state(&p.theta)?;
    let xi_state = ctx.dual_state(&d.phi)?;
    let xi = xi_state.probabilities();
    let fm = ctx.constraint_expectations(&psi);
    let terms = terms_from_states(ctx, &psi, &xi);

    // θ: gradient of ⟨ψ|α²M₀ + α²β²W|ψ⟩ with W = Σ|ξₘ|²Mₘ.
    let w = ctx.weighted_constraints(&xi);
    let o_theta = SparseMatrix::weighted_sum(ctx.problem.dim(), [(a2, &ctx.problem.m0), (a2 * b2, &w)]);
    // φ: gradient of ⟨ξ|diag(α²β²Fₘ − β²bₘ)|ξ⟩.
    let dvals: Vec<f64> = fm.iter().zip(&ctx.s_diag).map(|(f, b)| a2 * b2 * f - b2 * b).collect();
    let o_phi = SparseMatrix::diagonal(&dvals);

    let (g_theta, g_phi) = match ctx.backend {
        GradientBackend::Adjoint => (
            statevector::adjoint_gradient(&ctx.primal_spec, &p.theta, &o_theta)?.1,
            statevector::adjoint_gradient(&ctx.dual_spec, &d.phi, &o_phi)?.1,
        ),
        GradientBackend::Psr => (
            statevector::psr_gradient(&ctx.primal_spec, &p.theta, |s| o_theta.expectation(s.amplitudes()))?,
            statevector::psr_gradient(&ctx.dual_spec, &d.phi, |s| o_phi.expectation(s.amplitudes()))?,
        ),
    };
    let g = Gradient {
        theta: g_theta,
        alpha: 2.0 * p.alpha * (terms.f0 + b2 * terms.f),
        phi: g_phi,
        beta: 2.0 * d.beta * (a2 * terms.f - terms.g),
        lagrangian: terms.lagrangian(p.alpha, d.beta),
        count: ctx.count(0),
    };
    Ok((g, terms))
}

fn grad_exact(ctx: &LagrangianContext, p: &PrimalPoint, d: &DualPoint) -> Result<Gradient> {
    Ok(grad_exact_with_terms(ctx, p, d)?.0)
}

fn grad_sampled(ctx: &LagrangianContext, p: &PrimalPoint, d: &DualPoint, shots: usize, ppd: usize, seed: u64) -> Result<Gradient> {
    let (a2, b2) = (p.alpha * p.alpha, d.beta * d.beta);
    let psi = ctx.primal_state(&p.theta)?;
    let xi = ctx.dual_state(&d.phi)?;
    let pn = ctx.p();
    // Stream layout: 0..P θ-shifts, P..P+Q φ-shifts, then the α/β terms.
    let g_theta: Vec<f64> = (0..pn)
        .into_par_iter()
        .map(|k| {
            let s = rng::derive(seed, k as u64);
            let (plus, minus) = statevector::shift_points(&p.theta, k).expect("index in range");
            let sp = ctx.primal_state(&plus).expect("valid");
            let sm = ctx.primal_state(&minus).expect("valid");
            let df0 = estimate_f0(ctx, &sp, shots, rng::derive(s, 0)) - estimate_f0(ctx, &sm, shots, rng::derive(s, 1));
            let df = estimate_f(ctx, &sp, &xi, shots, ppd, rng::derive(s, 2)) - estimate_f(ctx, &sm, &xi, shots, ppd, rng::derive(s, 3));
            0.5 * (a2 * df0 + a2 * b2 * df)
        })
        .collect();
    let g_phi: Vec<f64> = (0..ctx.q())
        .into_par_iter()
        .map(|k| {
            let s = rng::derive(seed, (pn + k) as u64);
            let (plus, minus) = statevector::shift_points(&d.phi, k).expect("index in range");
            let xp = ctx.dual_state(&plus).expect("valid");
            let xm = ctx.dual_state(&minus).expect("valid");
            let df = estimate_f(ctx, &psi, &xp, shots, ppd, rng::derive(s, 0)) - estimate_f(ctx, &psi, &xm, shots, ppd, rng::derive(s, 1));
            let dg = estimate_g(ctx, &xp, shots, rng::derive(s, 2)) - estimate_g(ctx, &xm, shots, rng::derive(s, 3));
            0.5 * (a2 * b2 * df - b2 * dg)
        })
        .collect();
    let base = rng::derive(seed, (pn + ctx.q()) as u64);
    let f0 = estimate_f0(ctx, &psi, shots, rng::derive(base, 0));
    let f = estimate_f(ctx, &psi, &xi, shots, ppd, rng::derive(base, 1));
    let g = estimate_g(ctx, &xi, shots, rng::derive(base, 2));
    Ok(Gradient {
        theta: g_theta,
        alpha: 2.0 * p.alpha * (f0 + b2 * f),
        phi: g_phi,
        beta: 2.0 * d.beta * (a2 * f - g),
        lagrangian: Terms { f0, f, g }.lagrangian(p.alpha, d.beta),
        count: ctx.count(shots),
    })
}

/// Exact variance `E‖ĝ − g‖²` of the sampled gradient, from per-piece
/// single-shot variances (primal-per-dual = 1).
pub fn sampled_gradient_variance(ctx: &LagrangianContext, p: &PrimalPoint, d: &DualPoint, shots: usize) -> Result<f64> {
    ctx.check(p, d)?;
    let (a2, b2) = (p.alpha * p.alpha, d.beta * d.beta);
    let s = shots as f64;
    let var_f0 = |psi: &QuantumState| xbm::estimator_variance(&ctx.m0_decomposition, psi, 1).0;
    let var_f = |psi: &QuantumState, xi: &[f64]| -> f64 {
        ctx.joint
            .pieces
            .iter()
            .map(|piece| {
                let mut rotated = psi.clone();
                for g in piece.circuit(ctx.joint.n_qubits) {
                    rotated.apply(&g).expect("sizes match");
                }
                let probs = rotated.probabilities();
                let (mut m1, mut m2) = (0.0, 0.0);
                for (m, diag) in &piece.members {
                    for (pi, l) in probs.iter().zip(diag) {
                        m1 += xi[*m] * pi * l;
                        m2 += xi[*m] * pi * l * l;
                    }
                }
                m2 - m1 * m1
            })
            .sum()
    };
    let var_g = |xi: &[f64]| -> f64 {
        let m1: f64 = xi.iter().zip(&ctx.s_diag).map(|(x, b)| x * b).sum();
        let m2: f64 = xi.iter().zip(&ctx.s_diag).map(|(x, b)| x * b * b).sum();
        m2 - m1 * m1
    };
    let psi = ctx.primal_state(&p.theta)?;
    let xi = ctx.dual_state(&d.phi)?.probabilities();
    let mut total = 4.0 * a2 * (var_f0(&psi) + b2 * b2 * var_f(&psi, &xi)) + 4.0 * b2 * (a2 * a2 * var_f(&psi, &xi) + var_g(&xi));
    for k in 0..ctx.p() {
        let (plus, minus) = statevector::shift_points(&p.theta, k)?;
        for th in [plus, minus] {
            let sp = ctx.primal_state(&th)?;
            total += 0.25 * a2 * a2 * (var_f0(&sp) + b2 * b2 * var_f(&sp, &xi));
        }
    }
    for k in 0..ctx.q() {
        let (plus, minus) = statevector::shift_points(&d.phi, k)?;
        for ph in [plus, minus] {
            let x = ctx.dual_state(&ph)?.probabilities();
            total += 0.25 * b2 * b2 * (a2 * a2 * var_f(&psi, &x) + var_g(&x));
        }
    }
    Ok(total / s)
}

/// Stacked signed field `g(z)` at `(θ, α, φ, β)`.
pub fn g_operator(ctx: &LagrangianContext, p: &PrimalPoint, d: &DualPoint, mode: EvalMode, seed: u64) -> Result<Vec<f64>> {
    Ok(grad(ctx, p, d, mode, seed)?.field())
}

/// Real-part overlap cost `1 − Re⟨ψ(θ)|w⟩/‖w‖`, in `[0, 2]`.
pub fn overlap_cost(spec: &AnsatzSpec, theta: &[f64], target: &[C64]) -> Result<f64> {
    let psi = prepare(spec, theta)?;
    let norm = linalg::norm(target);
    if norm == 0.0 || target.len() != psi.dim() {
        return Err(Error::validation("target must be a nonzero vector of the ansatz dimension"));
    }
    Ok(1.0 - linalg::inner(psi.amplitudes(), target).re / norm)
}

/// Gradient of [`overlap_cost`]. The overlap is linear in the state, so each
/// rotation angle enters as `a·cos(θ/2) + b·sin(θ/2)` and the exact shift rule
/// is `¼(f(θ + π) − f(θ − π))`.
pub fn overlap_gradient(spec: &AnsatzSpec, theta: &[f64], target: &[C64]) -> Result<Vec<f64>> {
    (0..theta.len())
        .into_par_iter()
        .map(|k| {
            let (plus, minus) = statevector::shift_points_by(theta, k, 2.0 * FRAC_PI_2)?;
            Ok(0.25 * (overlap_cost(spec, &plus, target)? - overlap_cost(spec, &minus, target)?))
        })
        .collect()
}

/// Random `(θ, φ)` in `[0, 2π)` with the given scalings.
pub fn random_point(ctx: &LagrangianContext, alpha: f64, beta: f64, seed: u64) -> (PrimalPoint, DualPoint) {
    let mut r = rng::rng(seed);
    let mut draw = |n: usize| (0..n).map(|_| r.random::<f64>() * std::f64::consts::TAU).collect::<Vec<_>>();
    let theta = draw(ctx.p());
    let phi = draw(ctx.q());
    (PrimalPoint { theta, alpha }, DualPoint { phi, beta })
}

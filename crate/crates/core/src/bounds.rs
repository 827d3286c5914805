//! Closed-form constants of the convergence analysis: the Lipschitz constant
//! `L` of `g`, the variance parameter `σ²` of `ĝ`, the EG iteration count `T`,
//! per-iteration shots `S`, and the total sample budget.

use serde::{Deserialize, Serialize};

use crate::linalg::SparseMatrix;
use crate::variational::LagrangianContext;
use crate::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub p: usize,
    pub q: usize,
    pub alpha_bar: f64,
    pub beta_bar: f64,
    /// `‖M₀‖`.
    pub norm_m0: f64,
    /// `maxₘ ‖Mₘ‖`.
    pub max_norm_mm: f64,
    /// `maxₘ |bₘ|`.
    pub max_abs_b: f64,
    /// `Σ_c ‖M₀ᶜ‖²`.
    pub piece_norms_m0: f64,
    /// `Σ_c maxₘ ‖Mₘᶜ‖²`.
    pub piece_max_norms: f64,
    /// Colour count `C`.
    pub colors: usize,
    pub rho: f64,
    pub epsilon: f64,
    /// Estimate of `‖z* − z⁰‖`.
    pub dist0: f64,
}

impl BoundInputs {
    /// Inputs measured from a context. `α̅` defaults to `1.1√N` with `N` the
    /// bus count.
    pub fn from_context(ctx: &LagrangianContext, alpha_bar: f64, beta_bar: f64) -> Self {
        let mut colors: Vec<usize> = ctx.m0_decomposition.colors();
        colors.extend(ctx.joint.pieces.iter().map(|p| p.color));
        colors.sort_unstable();
        colors.dedup();
        BoundInputs {
            p: ctx.p(),
            q: ctx.q(),
            alpha_bar,
            beta_bar,
            norm_m0: ctx.problem.m0.spectral_norm(),
            max_norm_mm: ctx.problem.constraints.iter().map(|c| c.matrix.spectral_norm()).fold(0.0, f64::max),
            max_abs_b: ctx.s_diag.iter().fold(0.0f64, |m, b| m.max(b.abs())),
            piece_norms_m0: ctx.m0_decomposition.sum_sq_norms(),
            piece_max_norms: ctx.joint.sum_sq_max_norms(),
            colors: colors.len(),
            rho: 0.0,
            epsilon: 1.0,
            dist0: 1.0,
        }
    }

    pub fn default_alpha_bar(n_buses: usize) -> f64 {
        1.1 * (n_buses as f64).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let reals = [
            self.alpha_bar,
            self.beta_bar,
            self.norm_m0,
            self.max_norm_mm,
            self.max_abs_b,
            self.piece_norms_m0,
            self.piece_max_norms,
            self.rho,
            self.dist0,
        ];
        if reals.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::validation("bound inputs must be finite and nonnegative"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::validation("epsilon must be positive"));
        }
        Ok(())
    }
}

pub fn lipschitz_l(x: &BoundInputs) -> f64 {
    let (a, b) = (x.alpha_bar, x.beta_bar);
    let (p, q) = (x.p as f64, x.q as f64);
    (p * a * a * b * b + q * a * a * b * b + 2.0 * a * b * b + 2.0 * a * a * b) * x.max_norm_mm
        + f64::max((p * a * a + 2.0 * a) * x.norm_m0, (q * b * b + 2.0 * b) * x.max_abs_b)
}

pub fn sigma_sq(x: &BoundInputs) -> f64 {
    let (a, b) = (x.alpha_bar, x.beta_bar);
    let (p, q) = (x.p as f64, x.q as f64);
    let (a2, b2) = (a * a, b * b);
    (q * b2 * b2 + 8.0 * b2) / 2.0 * x.max_abs_b.powi(2)
        + (8.0 * a2 + p * a2 * a2) / 2.0 * x.piece_norms_m0
        + (8.0 * a2 * b2 * b2 + 8.0 * a2 * a2 * b2 + (p + q) * a2 * a2 * b2 * b2) / 2.0 * x.piece_max_norms
}

/// `(2P + 1)(2C − 1) + 2Q + 1`.
pub fn circuits_per_iteration(p: usize, q: usize, colors: usize) -> u64 {
    let (p, q, c) = (p as u64, q as u64, colors as u64);
    (2 * p + 1) * (2 * c).saturating_sub(1) + 2 * q + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub lipschitz: f64,
    pub sigma_sq: f64,
    /// EG iterations `T`.
    pub iterations: u128,
    /// Samples per circuit per gradient evaluation `S`.
    pub shots: u128,
    pub circuits_per_iter: u64,
    /// Closed form with the `4224` constant.
    pub total: u128,
    /// `circuits · T · 2S` without the `8.25` relaxation.
    pub total_exact: u128,
}

/// Iterations, shots and total samples for the given inputs.
pub fn budget(x: &BoundInputs) -> Result<Budget> {
    x.validate()?;
    let l = lipschitz_l(x);
    let s2 = sigma_sq(x);
    budget_with(x, l, s2)
}

/// [`budget`] with `L` and `σ²` supplied.
pub fn budget_with(x: &BoundInputs, l: f64, s2: f64) -> Result<Budget> {
    let limit = 1.0 / (4.0 * SQRT2 * l);
    if !(x.rho >= 0.0 && x.rho < limit) {
        return Err(Error::validation(format!("rho = {} outside [0, 1/(4√2·L)) = [0, {limit:e})", x.rho)));
    }
    let shrink = 1.0 - 4.0 * SQRT2 * l * x.rho;
    let e2 = x.epsilon * x.epsilon;
    let t = ceil(32.0 * l * l * x.dist0 * x.dist0 / (e2 * shrink));
    let s = ceil(8.0 * s2 * (8.0 + SQRT2 * l * x.rho) / (e2 * shrink));
    let circuits = circuits_per_iteration(x.p, x.q, x.colors);
    let total = ceil(4224.0 * l * l * s2 * x.dist0 * x.dist0 / (e2 * e2 * shrink * shrink)).saturating_mul(circuits as u128);
    let total_exact = (circuits as u128).saturating_mul(t).saturating_mul(s.saturating_mul(2));
    Ok(Budget { lipschitz: l, sigma_sq: s2, iterations: t, shots: s, circuits_per_iter: circuits, total, total_exact })
}

fn ceil(x: f64) -> u128 {
    // Absorb float noise in quotients that are integers in exact arithmetic.
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as u128
    } else {
        x.ceil() as u128
    }
}

/// Spectral norms of a family, for reporting.
pub fn spectral_norms<'a>(ms: impl IntoIterator<Item = &'a SparseMatrix>) -> Vec<f64> {
    ms.into_iter().map(SparseMatrix::spectral_norm).collect()
}

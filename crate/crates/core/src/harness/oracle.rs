//! Brute-force reference solver for tiny networks.
//!
//! Multistart augmented-Lagrangian method on the real coordinates
//! `y = [Re v; Im v]`: starts cover a grid of magnitudes and angles on every
//! non-reference bus, each start is driven to a KKT point, and the cheapest
//! feasible one wins. The multipliers come out of the outer updates.

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::reference::ReferenceInstance;
use crate::grid::{assemble_qcqp, NetworkCase, QcqpProblem};
use crate::linalg::C64;
use crate::{Error, Result};

/// Largest network the oracle accepts.
pub const MAX_ORACLE_BUSES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    /// Start magnitudes per non-reference bus.
    pub magnitudes: [f64; 3],
    /// Start angles per non-reference bus.
    pub angles: [f64; 3],
    pub feasibility_tol: f64,
    pub max_outer: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { magnitudes: [0.95, 1.0, 1.05], angles: [-0.3, 0.0, 0.3], feasibility_tol: 1e-11, max_outer: 60 }
    }
}

/// Solution of one QCQP.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub v: Vec<C64>,
    pub lambda: Vec<f64>,
    /// `v†M₀v + offset`.
    pub cost: f64,
    pub max_violation: f64,
    /// `‖(M₀ + Σλₘ Mₘ)v‖`.
    pub stationarity: f64,
}

struct Penalized<'a> {
    problem: &'a QcqpProblem,
    lambda: &'a [f64],
    rho: f64,
}

fn to_complex(y: &[f64]) -> Vec<C64> {
    let n = y.len() / 2;
    (0..n).map(|i| C64::new(y[i], y[n + i])).collect()
}

impl Penalized<'_> {
    fn weights(&self, v: &[C64]) -> Vec<f64> {
        self.problem.residuals(v).iter().zip(self.lambda).map(|(c, l)| (l + self.rho * c).max(0.0)).collect()
    }
}

impl Penalized<'_> {
    /// Real Hessian `2·R(M₀ + Σwₘ Mₘ) + ρ Σ_{wₘ>0} ∇cₘ∇cₘᵀ`.
    fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        let v = to_complex(y);
        let n = v.len();
        let w = self.weights(&v);
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        let terms = std::iter::once((1.0, &self.problem.m0)).chain(w.iter().copied().zip(self.problem.constraints.iter().map(|c| &c.matrix)));
        for (wt, m) in terms {
            if wt == 0.0 {
                continue;
            }
            for &(r, c, z) in m.entries() {
                let z = z * (2.0 * wt);
                h[(r, c)] += z.re;
                h[(n + r, n + c)] += z.re;
                h[(r, n + c)] -= z.im;
                h[(n + r, c)] += z.im;
            }
        }
        for (m, &wt) in self.problem.constraints.iter().zip(&w) {
            if wt > 0.0 {
                let mv = m.matrix.matvec(&v);
                let grad: Vec<f64> = mv.iter().map(|z| 2.0 * z.re).chain(mv.iter().map(|z| 2.0 * z.im)).collect();
                let gv = DVector::from_vec(grad);
                h += self.rho * &gv * gv.transpose();
            }
        }
        h
    }
}

impl CostFunction for Penalized<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, y: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let v = to_complex(y);
        let res = self.problem.residuals(&v);
        let pen: f64 =
            res.iter().zip(self.lambda).map(|(c, l)| ((l + self.rho * c).max(0.0).powi(2) - l * l) / (2.0 * self.rho)).sum();
        Ok(self.problem.m0.expectation(&v) + pen)
    }
}

impl Gradient for Penalized<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, y: &Vec<f64>) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        let v = to_complex(y);
        let w = self.weights(&v);
        let h = crate::linalg::SparseMatrix::weighted_sum(
            v.len(),
            std::iter::once((1.0, &self.problem.m0)).chain(w.iter().copied().zip(self.problem.constraints.iter().map(|c| &c.matrix))),
        );
        let hv = h.matvec(&v);
        let mut g: Vec<f64> = hv.iter().map(|z| 2.0 * z.re).collect();
        g.extend(hv.iter().map(|z| 2.0 * z.im));
        Ok(g)
    }
}

fn inner_solve(problem: &QcqpProblem, lambda: &[f64], rho: f64, y0: Vec<f64>) -> Result<Vec<f64>> {
    let op = Penalized { problem, lambda, rho };
    let solver = LBFGS::new(MoreThuenteLineSearch::new(), 10)
        .with_tolerance_grad(1e-10)
        .and_then(|s| s.with_tolerance_cost(1e-15))
        .map_err(|e| Error::validation(e.to_string()))?;
    let res = Executor::new(Penalized { problem, lambda, rho }, solver)
        .configure(|s| s.param(y0.clone()).max_iters(500))
        .run()
        .map_err(|e| Error::validation(format!("oracle inner solve failed: {e}")))?;
    let y = res.state().get_best_param().cloned().unwrap_or(y0);
    Ok(newton_polish(&op, y))
}

/// Levenberg-damped Newton steps on the penalized function; quadratic
/// convergence near the minimizer where L-BFGS stalls.
fn newton_polish(op: &Penalized, mut y: Vec<f64>) -> Vec<f64> {
    let n2 = y.len();
    let mut damping = 1e-10;
    let mut cost = op.cost(&y).unwrap_or(f64::INFINITY);
    for _ in 0..50 {
        let g = op.gradient(&y).expect("finite");
        if crate::linalg::real_norm(&g) < 1e-14 {
            break;
        }
        let h = op.hessian(&y);
        let mut accepted = false;
        while damping < 1e8 {
            let mut a = h.clone();
            for i in 0..n2 {
                a[(i, i)] += damping * (1.0 + h[(i, i)].abs());
            }
            let Some(d) = a.lu().solve(&DVector::from_column_slice(&g)) else {
                damping *= 10.0;
                continue;
            };
            let trial: Vec<f64> = y.iter().zip(d.iter()).map(|(a, b)| a - b).collect();
            let c = op.cost(&trial).unwrap_or(f64::INFINITY);
            if c <= cost {
                y = trial;
                cost = c;
                damping = (damping / 10.0).max(1e-14);
                accepted = true;
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    y
}

fn max_violation(problem: &QcqpProblem, v: &[C64]) -> f64 {
    problem.residuals(v).into_iter().fold(0.0, f64::max)
}

/// One augmented-Lagrangian run from `v0`.
pub fn solve_from(problem: &QcqpProblem, v0: &[C64], opts: &OracleOptions) -> Result<OracleSolution> {
    let mut y: Vec<f64> = v0.iter().map(|z| z.re).chain(v0.iter().map(|z| z.im)).collect();
    let mut lambda = vec![0.0; problem.m()];
    let mut rho = 10.0;
    let mut prev = f64::INFINITY;
    for _ in 0..opts.max_outer {
        y = inner_solve(problem, &lambda, rho, y)?;
        let v = to_complex(&y);
        let res = problem.residuals(&v);
        for (l, c) in lambda.iter_mut().zip(&res) {
            *l = (*l + rho * c).max(0.0);
        }
        // Complementarity-aware infeasibility.
        let infeas = res.iter().zip(&lambda).map(|(c, l)| c.max(-l / rho).abs()).fold(0.0, f64::max);
        if infeas < opts.feasibility_tol {
            break;
        }
        if infeas > 0.25 * prev {
            rho = (rho * 5.0).min(1e9);
        }
        prev = infeas;
    }
    let mut v = to_complex(&y);
    fix_gauge(problem, &mut v);
    let h = crate::linalg::SparseMatrix::weighted_sum(
        v.len(),
        std::iter::once((1.0, &problem.m0)).chain(lambda.iter().copied().zip(problem.constraints.iter().map(|c| &c.matrix))),
    );
    let stationarity = crate::linalg::norm(&h.matvec(&v));
    Ok(OracleSolution {
        cost: problem.objective(&v),
        max_violation: max_violation(problem, &v),
        stationarity,
        lambda,
        v,
    })
}

/// Rotates the global phase so the largest-magnitude reference candidate
/// (the first bus with a reference row, else bus 0) is real and positive.
fn fix_gauge(problem: &QcqpProblem, v: &mut [C64]) {
    use crate::grid::{ConstraintKind, Origin};
    let r = problem
        .labels
        .iter()
        .find_map(|l| match (l.kind, l.origin) {
            (ConstraintKind::Reference, Origin::Node(k)) => Some(k),
            _ => None,
        })
        .unwrap_or(0);
    let a = v[r];
    if a.norm() > 0.0 {
        let phase = a.conj() / a.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}

/// Global search over the start grid. Returns the cheapest start that ends
/// feasible to `10³·feasibility_tol`.
pub fn solve_case(case: &NetworkCase, opts: &OracleOptions) -> Result<OracleSolution> {
    if case.n() > MAX_ORACLE_BUSES {
        return Err(Error::validation(format!(
            "the brute-force oracle handles at most {MAX_ORACLE_BUSES} buses, case has {}",
            case.n()
        )));
    }
    let problem = assemble_qcqp(case);
    let others: Vec<usize> = (0..case.n()).filter(|&k| k != case.reference_bus).collect();
    let per_bus: Vec<(f64, f64)> = opts.magnitudes.iter().flat_map(|&m| opts.angles.iter().map(move |&a| (m, a))).collect();
    let starts = per_bus.len().pow(others.len() as u32);
    let solutions: Vec<(usize, OracleSolution)> = (0..starts)
        .into_par_iter()
        .filter_map(|s| {
            let mut v = vec![C64::from(1.0); case.n()];
            let mut code = s;
            for &k in &others {
                let (m, a) = per_bus[code % per_bus.len()];
                code /= per_bus.len();
                v[k] = C64::from_polar(m, a);
            }
            match solve_from(&problem, &v, opts) {
                Ok(sol) if sol.max_violation <= 1e3 * opts.feasibility_tol => Some((s, sol)),
                Ok(_) => None,
                Err(e) => {
                    log::debug!("oracle start {s} failed: {e}");
                    None
                }
            }
        })
        .collect();
    // Lowest cost; near-ties go to the earliest start.
    let mut best: Option<OracleSolution> = None;
    for (_, sol) in solutions {
        if best.as_ref().is_none_or(|b| sol.cost < b.cost - 1e-12) {
            best = Some(sol);
        }
    }
    best.ok_or_else(|| Error::validation(format!("oracle found no feasible point for case '{}'", case.name)))
}

/// Reference record for one instance from the oracle.
pub fn reference_for(case: &NetworkCase, opts: &OracleOptions) -> Result<ReferenceInstance> {
    let sol = solve_case(case, opts)?;
    Ok(ReferenceInstance::from_solution(case, &assemble_qcqp(case), &sol.v, &sol.lambda))
}

//! Error and feasibility metrics against a reference solution.

use serde::{Deserialize, Serialize};

use super::reference::{generator_setpoints, market_multipliers, ReferenceInstance};
use crate::grid::{NetworkCase, QcqpProblem};
use crate::linalg::{real_norm, C64};
use crate::{Error, Result};

/// Violations below this normalized magnitude are ignored.
pub const VIOLATION_FLOOR: f64 = 1e-6;

/// A solution recovered in the original bus order and row order.
#[derive(Debug, Clone, PartialEq)]
pub struct FoundSolution {
    pub v: Vec<C64>,
    pub lambda: Vec<f64>,
    /// Final Lagrangian including the objective offset.
    pub lagrangian: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Violations {
    /// Rows above [`VIOLATION_FLOOR`].
    pub count: usize,
    /// Largest normalized violation, percent.
    pub max_pct: f64,
    /// Normalized violation averaged over every limit row, percent.
    pub mean_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `‖x − x*‖/‖x*‖`.
    pub x_err: f64,
    /// `‖λ − λ*‖/‖λ*‖` over market rows.
    pub lambda_err: f64,
    pub violations: Violations,
    /// `|𝓛 − P*|/|P*|`.
    pub lagrangian_err: f64,
}

/// `‖a − b‖/‖b‖`; the absolute error when `b = 0`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nb = real_norm(b);
    if nb == 0.0 {
        real_norm(&diff)
    } else {
        real_norm(&diff) / nb
    }
}

/// Normalized violation statistics over the generator, voltage and line rows.
pub fn violations(problem: &QcqpProblem, v: &[C64]) -> Violations {
    let res = problem.residuals(v);
    let norm: Vec<f64> = problem
        .labels
        .iter()
        .zip(&res)
        .filter(|(l, _)| l.kind.is_limit_row())
        .map(|(l, r)| r.max(0.0) / l.scale)
        .collect();
    if norm.is_empty() {
        return Violations::default();
    }
    let counted: Vec<f64> = norm.iter().map(|&x| if x > VIOLATION_FLOOR { x } else { 0.0 }).collect();
    Violations {
        count: counted.iter().filter(|&&x| x > 0.0).count(),
        max_pct: 100.0 * counted.iter().copied().fold(0.0, f64::max),
        mean_pct: 100.0 * counted.iter().sum::<f64>() / counted.len() as f64,
    }
}

/// Metrics of `found` against `reference`. When `pf_voltage` is supplied
/// (an external power-flow solution at the found setpoints), violations are
/// evaluated there instead of at `found.v`.
pub fn compute_metrics(
    case: &NetworkCase,
    problem: &QcqpProblem,
    found: &FoundSolution,
    reference: &ReferenceInstance,
    pf_voltage: Option<&[C64]>,
) -> Result<Metrics> {
    reference.validate(case, problem)?;
    if found.v.len() != case.n() || found.lambda.len() != problem.m() {
        return Err(Error::dimension(format!(
            "found solution has |v| = {}, |λ| = {}; expected {} and {}",
            found.v.len(),
            found.lambda.len(),
            case.n(),
            problem.m()
        )));
    }
    let x = generator_setpoints(case, &found.v);
    let lam = market_multipliers(problem, &found.lambda);
    let at = pf_voltage.unwrap_or(&found.v);
    if at.len() != case.n() {
        return Err(Error::dimension("power-flow voltage length differs from the bus count"));
    }
    Ok(Metrics {
        x_err: relative_error(&x, &reference.x),
        lambda_err: relative_error(&lam, &reference.lambda),
        violations: violations(problem, at),
        lagrangian_err: lagrangian_error(found.lagrangian, reference.cost),
    })
}

pub fn lagrangian_error(lagrangian: f64, p_star: f64) -> f64 {
    if p_star == 0.0 {
        lagrangian.abs()
    } else {
        (lagrangian - p_star).abs() / p_star.abs()
    }
}

/// Sorted multipliers with entries below `10⁻⁶` set to zero.
pub fn dual_series(lambdas: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut s: Vec<f64> = lambdas.into_iter().map(|x| if x.abs() < VIOLATION_FLOOR { 0.0 } else { x }).collect();
    s.sort_by(f64::total_cmp);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_examples() {
        assert_eq!(relative_error(&[2.0, 4.0], &[1.0, 2.0]), 1.0);
        assert_eq!(relative_error(&[1.0], &[1.0]), 0.0);
        assert_eq!(relative_error(&[3.0, 4.0], &[0.0, 0.0]), 5.0);
    }

    #[test]
    fn dual_series_zeroes_small_entries() {
        assert_eq!(dual_series([3.0, 1e-7, -2e-7, 1.0]), vec![0.0, 0.0, 1.0, 3.0]);
    }
}

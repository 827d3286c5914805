//! Reference solutions: generator setpoints, market multipliers and optimal
//! cost per instance, stored as JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::grid::{build_admittance, injection_matrices, NetworkCase, QcqpProblem};
use crate::linalg::C64;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceInstance {
    /// `[p_g; |v_g|]` over generators in bus order.
    pub x: Vec<f64>,
    /// Multipliers of the market rows (balance and line limits) in
    /// assembly order.
    pub lambda: Vec<f64>,
    /// Optimal cost `P*`.
    pub cost: f64,
    /// Optimal voltages `[re, im]` per bus, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltage: Option<Vec<[f64; 2]>>,
    /// Multipliers of every row, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_full: Option<Vec<f64>>,
}

impl ReferenceInstance {
    pub fn from_solution(case: &NetworkCase, problem: &QcqpProblem, v: &[C64], lambda: &[f64]) -> Self {
        ReferenceInstance {
            x: generator_setpoints(case, v),
            lambda: market_multipliers(problem, lambda),
            cost: problem.objective(v),
            voltage: Some(v.iter().map(|z| [z.re, z.im]).collect()),
            lambda_full: Some(lambda.to_vec()),
        }
    }

    pub fn voltage_vector(&self) -> Option<Vec<C64>> {
        self.voltage.as_ref().map(|v| v.iter().map(|&[re, im]| C64::new(re, im)).collect())
    }

    /// Checks sizes against the instance's case and QCQP.
    pub fn validate(&self, case: &NetworkCase, problem: &QcqpProblem) -> Result<()> {
        let gens = case.generators.len();
        let market = problem.labels.iter().filter(|l| l.kind.is_market_row()).count();
        if self.x.len() != 2 * gens {
            return Err(Error::validation(format!("reference x has {} entries, expected {}", self.x.len(), 2 * gens)));
        }
        if self.lambda.len() != market {
            return Err(Error::validation(format!("reference lambda has {} entries, expected {market}", self.lambda.len())));
        }
        if self.voltage.as_ref().is_some_and(|v| v.len() != case.n()) {
            return Err(Error::validation("reference voltage length differs from the bus count"));
        }
        if self.lambda_full.as_ref().is_some_and(|l| l.len() != problem.m()) {
            return Err(Error::validation("reference lambda_full length differs from the row count"));
        }
        if !self.cost.is_finite() {
            return Err(Error::validation("reference cost must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub case: String,
    pub instances: Vec<ReferenceInstance>,
}

impl ReferenceSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reference serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("reference solution: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// `[p_g; |v_g|]` with `p_g = v†M_p v + p_d` at each generator bus.
pub fn generator_setpoints(case: &NetworkCase, v: &[C64]) -> Vec<f64> {
    let y = build_admittance(case);
    let mut gens: Vec<usize> = case.generators.iter().map(|g| g.bus).collect();
    gens.sort_unstable();
    let p: Vec<f64> = gens
        .iter()
        .map(|&k| {
            let (mp, _) = injection_matrices(&y, k).expect("generator bus in range");
            mp.expectation(&v[..case.n()]) + case.buses[k].p_demand
        })
        .collect();
    p.into_iter().chain(gens.iter().map(|&k| v[k].norm())).collect()
}

/// Multipliers of the market rows, in row order.
pub fn market_multipliers(problem: &QcqpProblem, lambda: &[f64]) -> Vec<f64> {
    problem.labels.iter().zip(lambda).filter(|(l, _)| l.kind.is_market_row()).map(|(_, &x)| x).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble_qcqp, fixtures::two_bus};

    #[test]
    fn json_round_trip() {
        let case = two_bus();
        let p = assemble_qcqp(&case);
        let v = vec![C64::new(1.0, 0.0), C64::new(0.95, -0.05)];
        let lam: Vec<f64> = (0..p.m()).map(|i| i as f64 * 0.1).collect();
        let r = ReferenceSolution { case: case.name.clone(), instances: vec![ReferenceInstance::from_solution(&case, &p, &v, &lam)] };
        r.instances[0].validate(&case, &p).unwrap();
        assert_eq!(ReferenceSolution::from_json(&r.to_json()).unwrap(), r);
        // 4 balance rows + 1 line row.
        assert_eq!(r.instances[0].lambda.len(), 5);
        assert_eq!(r.instances[0].x.len(), 2);
    }
}

//! The canonical QCQP `min v†M₀v + offset  s.t.  v†Mₘv ≤ bₘ`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::matrices::{auxiliary_matrices, build_admittance, injection_matrices};
use super::{BusKind, NetworkCase};
use crate::linalg::{next_pow2, SparseMatrix, C64};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    PowerBalanceP,
    PowerBalanceQ,
    GenLimitP,
    GenLimitQ,
    Voltage,
    Reference,
    LineCurrent,
    Padding,
}

impl ConstraintKind {
    /// Rows whose multipliers are priced (balance and line limits).
    pub fn is_market_row(self) -> bool {
        matches!(self, Self::PowerBalanceP | Self::PowerBalanceQ | Self::LineCurrent)
    }

    /// Genuine inequality rows checked for violations: generator, voltage and
    /// line limits. Balance and reference rows are split equalities.
    pub fn is_limit_row(self) -> bool {
        matches!(self, Self::GenLimitP | Self::GenLimitQ | Self::Voltage | Self::LineCurrent)
    }
}

/// Which half of a two-sided relation a row encodes: `Upper` rows read
/// `v†Mv ≤ b`, `Lower` rows are the negated `−v†Mv ≤ −b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Node(usize),
    Edge(usize, usize),
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintLabel {
    pub kind: ConstraintKind,
    pub side: Side,
    pub origin: Origin,
    /// Magnitude used to normalize violations of this row.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub matrix: SparseMatrix,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcqpProblem {
    /// Number of buses before padding.
    pub n: usize,
    pub m0: SparseMatrix,
    /// Constant added to `v†M₀v` (the `Σ cₙ p_dₙ` left over after
    /// substituting generator output; zero under the simplified loads).
    pub objective_offset: f64,
    pub constraints: Vec<Bound>,
    pub labels: Vec<ConstraintLabel>,
}

impl QcqpProblem {
    /// Primal dimension (padded, if padding was applied).
    pub fn dim(&self) -> usize {
        self.m0.dim()
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn bounds(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.bound).collect()
    }

    pub fn objective(&self, v: &[C64]) -> f64 {
        self.m0.expectation(v) + self.objective_offset
    }

    /// `v†Mₘv − bₘ` for every row.
    pub fn residuals(&self, v: &[C64]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.matrix.expectation(v) - c.bound).collect()
    }

    /// `v†M₀v + Σ λₘ(v†Mₘv − bₘ)`; the objective offset is not included.
    pub fn lagrangian(&self, v: &[C64], lambda: &[f64]) -> f64 {
        assert_eq!(lambda.len(), self.m(), "multiplier length mismatch");
        let mut acc = self.m0.expectation(v);
        for (c, &l) in self.constraints.iter().zip(lambda) {
            if l != 0.0 {
                acc += l * (c.matrix.expectation(v) - c.bound);
            }
        }
        acc
    }

    /// Largest Hermitian residual over all matrices.
    pub fn hermitian_residual(&self) -> f64 {
        self.constraints.iter().map(|c| c.matrix.hermitian_residual()).fold(self.m0.hermitian_residual(), f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.labels.len() != self.constraints.len() {
            return Err(Error::dimension("one label per constraint required"));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if c.matrix.dim() != d {
                return Err(Error::dimension(format!("constraint {k} has dimension {} but M0 has {d}", c.matrix.dim())));
            }
            if !c.bound.is_finite() {
                return Err(Error::validation(format!("constraint {k} has a non-finite bound")));
            }
        }
        if self.hermitian_residual() > 1e-12 {
            return Err(Error::validation("problem matrices are not Hermitian"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: QcqpProblem = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json()).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_json(&text)
    }
}

fn nonzero_or_one(x: f64) -> f64 {
    if x.abs() > 0.0 {
        x.abs()
    } else {
        1.0
    }
}

/// Assembles the QCQP in row order: per-bus generator limits (P upper/lower,
/// Q upper/lower) or power balance (P, Q as two rows each), then voltage
/// magnitudes per bus, the reference magnitude, and line currents.
///
/// Voltage limits apply to squared magnitudes, so rows carry `v_min²`/`v_max²`.
pub fn assemble_qcqp(case: &NetworkCase) -> QcqpProblem {
    let n = case.n();
    let y = build_admittance(case);
    let aux = auxiliary_matrices(case);
    let mut constraints = Vec::new();
    let mut labels = Vec::new();
    let mut push = |matrix: SparseMatrix, bound: f64, kind, side, origin, scale| {
        constraints.push(Bound { matrix, bound });
        labels.push(ConstraintLabel { kind, side, origin, scale });
    };

    let mut m0 = SparseMatrix::zeros(n);
    let mut offset = 0.0;
    for bus in &case.buses {
        let k = bus.id;
        let (mp, mq) = injection_matrices(&y, k).expect("bus index in range");
        let origin = Origin::Node(k);
        match bus.kind {
            BusKind::Generator => {
                let g = case.generator_at(k).expect("validated generator bus");
                m0 = m0.add(&mp.scale(g.cost));
                offset += g.cost * bus.p_demand;
                let ps = nonzero_or_one(g.p_max.abs().max(g.p_min.abs()));
                let qs = nonzero_or_one(g.q_max.abs().max(g.q_min.abs()));
                push(mp.clone(), g.p_max - bus.p_demand, ConstraintKind::GenLimitP, Side::Upper, origin, ps);
                push(mp.neg(), bus.p_demand - g.p_min, ConstraintKind::GenLimitP, Side::Lower, origin, ps);
                push(mq.clone(), g.q_max - bus.q_demand, ConstraintKind::GenLimitQ, Side::Upper, origin, qs);
                push(mq.neg(), bus.q_demand - g.q_min, ConstraintKind::GenLimitQ, Side::Lower, origin, qs);
            }
            BusKind::Load => {
                let ps = nonzero_or_one(bus.p_demand);
                let qs = nonzero_or_one(bus.q_demand);
                push(mp.clone(), -bus.p_demand, ConstraintKind::PowerBalanceP, Side::Upper, origin, ps);
                push(mp.neg(), bus.p_demand, ConstraintKind::PowerBalanceP, Side::Lower, origin, ps);
                push(mq.clone(), -bus.q_demand, ConstraintKind::PowerBalanceQ, Side::Upper, origin, qs);
                push(mq.neg(), bus.q_demand, ConstraintKind::PowerBalanceQ, Side::Lower, origin, qs);
            }
        }
    }
    for (bus, mv) in case.buses.iter().zip(&aux.voltage) {
        let (lo, hi) = (bus.v_min * bus.v_min, bus.v_max * bus.v_max);
        let scale = nonzero_or_one(hi - lo);
        push(mv.clone(), hi, ConstraintKind::Voltage, Side::Upper, Origin::Node(bus.id), scale);
        push(mv.neg(), -lo, ConstraintKind::Voltage, Side::Lower, Origin::Node(bus.id), scale);
    }
    let r = Origin::Node(case.reference_bus);
    push(aux.reference.clone(), 1.0, ConstraintKind::Reference, Side::Upper, r, 1.0);
    push(aux.reference.neg(), -1.0, ConstraintKind::Reference, Side::Lower, r, 1.0);
    for (br, mi) in case.branches.iter().zip(&aux.current) {
        push(mi.clone(), br.i_max, ConstraintKind::LineCurrent, Side::Upper, Origin::Edge(br.from, br.to), br.i_max);
    }

    QcqpProblem { n, m0, objective_offset: offset, constraints, labels }
}

/// Zero-pads the primal dimension and the constraint count to powers of two.
/// Padding rows have a zero matrix and zero bound, so they add nothing to
/// the Lagrangian whatever their multiplier.
pub fn pad_to_qubits(problem: &QcqpProblem) -> QcqpProblem {
    let d = next_pow2(problem.dim());
    let m = next_pow2(problem.m());
    if d == problem.dim() && m == problem.m() {
        return problem.clone();
    }
    let mut constraints: Vec<Bound> =
        problem.constraints.iter().map(|c| Bound { matrix: c.matrix.padded(d), bound: c.bound }).collect();
    let mut labels = problem.labels.clone();
    while constraints.len() < m {
        constraints.push(Bound { matrix: SparseMatrix::zeros(d), bound: 0.0 });
        labels.push(ConstraintLabel { kind: ConstraintKind::Padding, side: Side::Upper, origin: Origin::None, scale: 1.0 });
    }
    QcqpProblem { n: problem.n, m0: problem.m0.padded(d), objective_offset: problem.objective_offset, constraints, labels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::fixtures::two_bus;

    #[test]
    fn two_bus_row_count() {
        let p = assemble_qcqp(&two_bus());
        // gen 4 + load 4 + voltage 4 + reference 2 + line 1
        assert_eq!(p.m(), 15);
        assert_eq!(p.labels.iter().filter(|l| l.kind == ConstraintKind::PowerBalanceP).count(), 2);
        p.validate().unwrap();
    }

    #[test]
    fn padding_is_inert() {
        let p = assemble_qcqp(&two_bus());
        let q = pad_to_qubits(&p);
        assert_eq!((q.dim(), q.m()), (2, 16));
        assert_eq!(q.labels[15].kind, ConstraintKind::Padding);
        let v = [C64::new(1.0, 0.1), C64::new(0.9, -0.2)];
        let mut lam: Vec<f64> = (0..15).map(|k| k as f64 * 0.1).collect();
        let base = p.lagrangian(&v, &lam);
        lam.push(123.0);
        assert_eq!(q.lagrangian(&v, &lam), base);
    }

    #[test]
    fn json_round_trip() {
        let p = pad_to_qubits(&assemble_qcqp(&two_bus()));
        assert_eq!(QcqpProblem::from_json(&p.to_json()).unwrap(), p);
    }
}

//! Layered hardware-efficient ansätze, one per row of the architecture table:
//!
//! | row | layer                 |
//! |-----|-----------------------|
//! | 1   | Rx–CX                 |
//! | 2   | Ry–CX                 |
//! | 3   | Rz–CX                 |
//! | 4   | Rx–CX–Ry–CX           |
//! | 5   | Rx–CX–Rz–CX           |
//! | 6   | Ry–CX–Rz–CX           |
//! | 7   | Rx–CX–Ry–CX–Rz–CX     |
//! | 8   | Rx–Ry–Rz–CX           |
//!
//! A rotation block puts one parameterized rotation on every qubit; an
//! entangling block is a CX chain. Parameter `layer·(R·n) + block·n + qubit`
//! drives rotation block `block` of layer `layer` on `qubit`, with `R`
//! rotation blocks per layer.

use serde::{Deserialize, Serialize};

use super::gate::{GateKind, GateOp};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Entangler {
    /// CX(q → q+1) for q = 0..n−2.
    #[default]
    Linear,
    /// Linear chain plus CX(n−1 → 0) when n > 2.
    Ring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    Rotation(GateKind),
    Entangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n_qubits: usize,
    pub layer_template: Vec<Block>,
    pub n_layers: usize,
    pub entangler: Entangler,
    /// Table row this spec was built from, if any.
    pub row: Option<u8>,
}

impl AnsatzSpec {
    /// Spec for table row `row` (1–8).
    pub fn from_table(row: u8, n_layers: usize, n_qubits: usize) -> Result<Self> {
        use Block::{Entangle as E, Rotation as R};
        use GateKind::{Rx, Ry, Rz};
        let template = match row {
            1 => vec![R(Rx), E],
            2 => vec![R(Ry), E],
            3 => vec![R(Rz), E],
            4 => vec![R(Rx), E, R(Ry), E],
            5 => vec![R(Rx), E, R(Rz), E],
            6 => vec![R(Ry), E, R(Rz), E],
            7 => vec![R(Rx), E, R(Ry), E, R(Rz), E],
            8 => vec![R(Rx), R(Ry), R(Rz), E],
            _ => return Err(Error::validation(format!("architecture row must be 1..=8, got {row}"))),
        };
        if n_qubits == 0 {
            return Err(Error::validation("ansatz needs at least one qubit"));
        }
        Ok(AnsatzSpec { n_qubits, layer_template: template, n_layers, entangler: Entangler::Linear, row: Some(row) })
    }

    pub fn with_entangler(mut self, entangler: Entangler) -> Self {
        self.entangler = entangler;
        self
    }

    pub fn rotations_per_layer(&self) -> usize {
        self.layer_template.iter().filter(|b| matches!(b, Block::Rotation(_))).count()
    }

    pub fn param_count(&self) -> usize {
        self.rotations_per_layer() * self.n_layers * self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// Gate list for `params`, in application order.
    pub fn circuit(&self, params: &[f64]) -> Result<Vec<GateOp>> {
        if params.len() != self.param_count() {
            return Err(Error::dimension(format!(
                "ansatz takes {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        Ok(self.circuit_with_params(params).into_iter().map(|(g, _)| g).collect())
    }

    /// Gate list where each rotation is tagged with its parameter index.
    pub fn circuit_with_params(&self, params: &[f64]) -> Vec<(GateOp, Option<usize>)> {
        let n = self.n_qubits;
        let r = self.rotations_per_layer();
        let mut gates = Vec::new();
        for layer in 0..self.n_layers {
            let mut block = 0;
            for b in &self.layer_template {
                match *b {
                    Block::Rotation(kind) => {
                        for q in 0..n {
                            let p = layer * r * n + block * n + q;
                            gates.push((GateOp::rotation(kind, q, params[p]), Some(p)));
                        }
                        block += 1;
                    }
                    Block::Entangle => {
                        for q in 0..n.saturating_sub(1) {
                            gates.push((GateOp::cx(q, q + 1), None));
                        }
                        if self.entangler == Entangler::Ring && n > 2 {
                            gates.push((GateOp::cx(n - 1, 0), None));
                        }
                    }
                }
            }
        }
        gates
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_parameter_counts() {
        let counts: Vec<usize> = [(1, 20), (2, 20), (3, 20), (4, 10), (5, 10), (6, 10), (7, 6), (8, 7)]
            .iter()
            .map(|&(row, l)| AnsatzSpec::from_table(row, l, 6).unwrap().param_count())
            .collect();
        assert_eq!(counts, vec![120, 120, 120, 120, 120, 120, 108, 126]);
        let dual: Vec<usize> = [(1, 35), (4, 18), (7, 12), (8, 12)]
            .iter()
            .map(|&(row, l)| AnsatzSpec::from_table(row, l, 9).unwrap().param_count())
            .collect();
        assert_eq!(dual, vec![315, 324, 324, 324]);
        assert!(AnsatzSpec::from_table(9, 1, 2).is_err());
    }

    #[test]
    fn parameter_layout() {
        let spec = AnsatzSpec::from_table(6, 2, 3).unwrap();
        let params: Vec<f64> = (0..12).map(f64::from).collect();
        let tagged = spec.circuit_with_params(&params);
        let idx: Vec<usize> = tagged.iter().filter_map(|(_, p)| *p).collect();
        assert_eq!(idx, (0..12).collect::<Vec<_>>());
        // Second rotation block of layer 0 is Rz on qubits 0..3 → params 3..6.
        let rz: Vec<usize> = tagged.iter().filter(|(g, _)| g.kind == GateKind::Rz).filter_map(|(_, p)| *p).collect();
        assert_eq!(rz, vec![3, 4, 5, 9, 10, 11]);
    }
}

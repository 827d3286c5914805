//! Power-system cases and their QCQP form.
//!
//! Node indices are 0-based internally and 1-based in every file format.
//! All electrical quantities are per-unit.

mod case_format;
mod matpower;
mod matrices;
mod qcqp;

pub use case_format::{parse_case, read_case, write_case};
pub use matpower::{import_matpower, ImportOptions};
pub use matrices::{admittance_pattern, auxiliary_matrices, build_admittance, injection_matrices, AuxiliaryMatrices};
pub use qcqp::{
    assemble_qcqp, pad_to_qubits, Bound, ConstraintKind, ConstraintLabel, Origin, QcqpProblem, Side,
};

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BusKind {
    Generator,
    Load,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusRecord {
    pub id: usize,
    pub kind: BusKind,
    pub p_demand: f64,
    pub q_demand: f64,
    /// Voltage magnitude bounds (not squared).
    pub v_min: f64,
    pub v_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub from: usize,
    pub to: usize,
    pub g_series: f64,
    pub b_series: f64,
    /// Bound on `v†M_i v = |Y_nm|·|v_n − v_m|²`.
    pub i_max: f64,
}

impl BranchRecord {
    pub fn admittance_abs(&self) -> f64 {
        self.g_series.hypot(self.b_series)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRecord {
    pub bus: usize,
    /// Linear cost coefficient per per-unit of active power.
    pub cost: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase {
    pub name: String,
    pub buses: Vec<BusRecord>,
    pub branches: Vec<BranchRecord>,
    pub generators: Vec<GeneratorRecord>,
    pub reference_bus: usize,
}

impl NetworkCase {
    /// Builds a case and checks every structural invariant.
    pub fn new(
        name: impl Into<String>,
        buses: Vec<BusRecord>,
        branches: Vec<BranchRecord>,
        generators: Vec<GeneratorRecord>,
        reference_bus: usize,
    ) -> Result<Self> {
        let case = NetworkCase { name: name.into(), buses, branches, generators, reference_bus };
        case.validate()?;
        Ok(case)
    }

    pub fn n(&self) -> usize {
        self.buses.len()
    }

    pub fn n_edges(&self) -> usize {
        self.branches.len()
    }

    pub fn generator_buses(&self) -> Vec<usize> {
        self.buses.iter().filter(|b| b.kind == BusKind::Generator).map(|b| b.id).collect()
    }

    pub fn load_buses(&self) -> Vec<usize> {
        self.buses.iter().filter(|b| b.kind == BusKind::Load).map(|b| b.id).collect()
    }

    pub fn generator_at(&self, bus: usize) -> Option<&GeneratorRecord> {
        self.generators.iter().find(|g| g.bus == bus)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::validation("case has no buses"));
        }
        for (k, bus) in self.buses.iter().enumerate() {
            if bus.id != k {
                return Err(Error::validation(format!("bus {} stored at position {}", bus.id + 1, k + 1)));
            }
            let label = bus.id + 1;
            if !(bus.v_min > 0.0 && bus.v_min.is_finite()) {
                return Err(Error::validation(format!("bus {label}: v_min must be positive, got {}", bus.v_min)));
            }
            if !(bus.v_max >= bus.v_min && bus.v_max.is_finite()) {
                return Err(Error::validation(format!("bus {label}: v_min {} exceeds v_max {}", bus.v_min, bus.v_max)));
            }
            if !bus.p_demand.is_finite() || !bus.q_demand.is_finite() {
                return Err(Error::validation(format!("bus {label}: non-finite demand")));
            }
        }
        if self.reference_bus >= n {
            return Err(Error::validation(format!("reference bus {} out of range", self.reference_bus + 1)));
        }

        let mut edges = BTreeSet::new();
        for br in &self.branches {
            let (a, b) = (br.from, br.to);
            if a >= n || b >= n {
                return Err(Error::validation(format!("branch ({}, {}) references a missing bus", a + 1, b + 1)));
            }
            if a == b {
                return Err(Error::validation(format!("branch ({}, {}) is a self-loop", a + 1, b + 1)));
            }
            if !edges.insert((a.min(b), a.max(b))) {
                return Err(Error::validation(format!("duplicate branch between buses {} and {}", a + 1, b + 1)));
            }
            if !(br.i_max > 0.0) {
                return Err(Error::validation(format!("branch ({}, {}): i_max must be positive", a + 1, b + 1)));
            }
            if !br.g_series.is_finite() || !br.b_series.is_finite() || br.admittance_abs() == 0.0 {
                return Err(Error::validation(format!("branch ({}, {}): series admittance must be finite and nonzero", a + 1, b + 1)));
            }
        }

        let mut hosted = vec![false; n];
        for g in &self.generators {
            if g.bus >= n {
                return Err(Error::validation(format!("generator at missing bus {}", g.bus + 1)));
            }
            if hosted[g.bus] {
                return Err(Error::validation(format!("bus {} hosts more than one generator", g.bus + 1)));
            }
            hosted[g.bus] = true;
            if self.buses[g.bus].kind != BusKind::Generator {
                return Err(Error::validation(format!("generator at load bus {}", g.bus + 1)));
            }
            if !(g.p_min <= g.p_max) || !(g.q_min <= g.q_max) {
                return Err(Error::validation(format!("generator at bus {}: inverted limits", g.bus + 1)));
            }
            if !g.cost.is_finite() {
                return Err(Error::validation(format!("generator at bus {}: non-finite cost", g.bus + 1)));
            }
        }
        if let Some(bus) = self.buses.iter().find(|b| b.kind == BusKind::Generator && !hosted[b.id]) {
            return Err(Error::validation(format!("generator bus {} has no generator record", bus.id + 1)));
        }

        if let Some(node) = unreached_node(n, self.branches.iter().map(|b| (b.from, b.to))) {
            return Err(Error::validation(format!("network is disconnected: bus {} is unreachable from bus 1", node + 1)));
        }
        Ok(())
    }

    /// Load convention used in the experiments: generator buses carry no
    /// inelastic load, and every load bus draws `q_d = 0.33·p_d`.
    pub fn with_simplified_loads(&self) -> NetworkCase {
        let mut out = self.clone();
        for bus in &mut out.buses {
            match bus.kind {
                BusKind::Generator => {
                    bus.p_demand = 0.0;
                    bus.q_demand = 0.0;
                }
                BusKind::Load => bus.q_demand = 0.33 * bus.p_demand,
            }
        }
        out
    }
}

/// First node not reachable from node 0 over `edges`, if any.
pub(crate) fn unreached_node(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Option<usize> {
    let mut adj = vec![Vec::new(); n];
    for (a, b) in edges {
        if a != b {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen.iter().position(|&s| !s)
}

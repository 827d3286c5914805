//! Shared helpers for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use qopf_core::grid::{self, Bound, ConstraintKind, ConstraintLabel, ImportOptions, NetworkCase, Origin, QcqpProblem, Side};
use qopf_core::linalg::{SparseMatrix, C64};
use qopf_core::statevector::QuantumState;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn two_bus() -> NetworkCase {
    grid::read_case(data("two_bus.case")).expect("two-bus fixture parses")
}

pub fn case57() -> NetworkCase {
    let text = std::fs::read_to_string(data("case57.m")).expect("case57.m present");
    grid::import_matpower(&text, "case57", &ImportOptions { drop_quadratic_cost: true }).expect("case57 imports")
}

pub fn random_c64(r: &mut impl Rng) -> C64 {
    C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
}

pub fn random_vector(n: usize, r: &mut impl Rng) -> Vec<C64> {
    (0..n).map(|_| random_c64(r)).collect()
}

pub fn random_state(n_qubits: usize, r: &mut impl Rng) -> QuantumState {
    QuantumState::normalized(random_vector(1 << n_qubits, r)).expect("nonzero vector")
}

/// Random Hermitian matrix; each upper-triangle entry is kept with
/// probability `density`.
pub fn random_hermitian(dim: usize, density: f64, r: &mut impl Rng) -> SparseMatrix {
    let mut trip = Vec::new();
    for i in 0..dim {
        trip.push((i, i, C64::from(r.random_range(-1.0..1.0))));
        for j in i + 1..dim {
            if r.random::<f64>() < density {
                let z = random_c64(r);
                trip.push((i, j, z));
                trip.push((j, i, z.conj()));
            }
        }
    }
    SparseMatrix::from_triplets(dim, trip)
}

/// Random QCQP with `dim` voltages and `m` rows (both powers of two).
pub fn random_problem(dim: usize, m: usize, r: &mut impl Rng) -> QcqpProblem {
    let label = ConstraintLabel { kind: ConstraintKind::Voltage, side: Side::Upper, origin: Origin::None, scale: 1.0 };
    QcqpProblem {
        n: dim,
        m0: random_hermitian(dim, 0.6, r),
        objective_offset: 0.0,
        constraints: (0..m).map(|_| Bound { matrix: random_hermitian(dim, 0.6, r), bound: r.random_range(-1.0..1.0) }).collect(),
        labels: vec![label; m],
    }
}

/// Dense `ψ†Mψ` by a double loop.
pub fn dense_expectation(m: &SparseMatrix, x: &[C64]) -> f64 {
    let d = m.to_dense();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..x.len() {
        for j in 0..x.len() {
            acc += x[i].conj() * d[i][j] * x[j];
        }
    }
    acc.re
}

/// Max-abs entrywise difference.
pub fn max_diff(a: &SparseMatrix, b: &SparseMatrix) -> f64 {
    let (da, db) = (a.to_dense(), b.to_dense());
    da.iter().flatten().zip(db.iter().flatten()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

mod common;

use common::{dense_expectation, random_hermitian, random_state, rng};
use proptest::prelude::*;
use qopf_core::linalg::{SparseMatrix, C64};
use qopf_core::statevector::{
    adjoint_gradient, exact_expectation, prepare, psr_gradient, random_params, sample_basis, AnsatzSpec, GateOp, QuantumState,
};

fn gate_strategy(n: usize) -> impl Strategy<Value = GateOp> {
    (0usize..7, 0..n, 0..n, -10.0f64..10.0).prop_map(move |(k, a, b, t)| match k {
        0 => GateOp::rx(a, t),
        1 => GateOp::ry(a, t),
        2 => GateOp::rz(a, t),
        3 => GateOp::h(a),
        4 => GateOp::s(a),
        5 => GateOp::x(a),
        _ => GateOp::cx(a, if b == a { (a + 1) % n } else { b }),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn gates_preserve_norm(gates in prop::collection::vec(gate_strategy(4), 0..60), seed in any::<u64>()) {
        let mut s = random_state(4, &mut rng(seed));
        s.apply_all(&gates).unwrap();
        prop_assert!((s.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn prepared_states_are_normalized(row in 1u8..=8, layers in 1usize..4, nq in 1usize..5, seed in any::<u64>()) {
        let spec = AnsatzSpec::from_table(row, layers, nq).unwrap();
        let s = prepare(&spec, &random_params(spec.param_count(), seed)).unwrap();
        prop_assert!((s.norm() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn qubit_zero_is_least_significant() {
    let mut s = QuantumState::zero(3);
    s.apply(&GateOp::x(0)).unwrap();
    assert_eq!(s.probabilities()[1], 1.0);
    s.apply(&GateOp::cx(0, 2)).unwrap();
    assert_eq!(s.probabilities()[0b101], 1.0);
}

#[test]
fn invalid_gates_are_rejected() {
    let mut s = QuantumState::zero(2);
    assert!(s.apply(&GateOp::cx(1, 1)).is_err());
    assert!(s.apply(&GateOp::h(2)).is_err());
    assert!(QuantumState::from_amplitudes(vec![C64::new(1.0, 0.0); 2]).is_err());
}

#[test]
fn param_counts_follow_table() {
    let rotations = [1, 1, 1, 2, 2, 2, 3, 3];
    for (row, r) in (1u8..=8).zip(rotations) {
        let spec = AnsatzSpec::from_table(row, 3, 4).unwrap();
        assert_eq!(spec.param_count(), r * 3 * 4, "row {row}");
    }
    assert!(AnsatzSpec::from_table(9, 1, 1).is_err());
}

#[test]
fn expectation_matches_double_loop() {
    let mut r = rng(2);
    for _ in 0..20 {
        let m = random_hermitian(8, 1.0, &mut r);
        let s = random_state(3, &mut r);
        assert!((exact_expectation(&s, &m).unwrap() - dense_expectation(&m, s.amplitudes())).abs() < 1e-12);
    }
}

#[test]
fn psr_and_adjoint_match_finite_differences() {
    let h = 1e-5;
    let mut r = rng(4);
    for row in 1u8..=8 {
        let spec = AnsatzSpec::from_table(row, 2, 3).unwrap();
        let obs = random_hermitian(8, 0.7, &mut r);
        let theta = random_params(spec.param_count(), u64::from(row));
        let f = |s: &QuantumState| obs.expectation(s.amplitudes());
        let psr = psr_gradient(&spec, &theta, f).unwrap();
        let (_, adj) = adjoint_gradient(&spec, &theta, &obs).unwrap();
        for k in 0..theta.len() {
            let (mut p, mut m) = (theta.clone(), theta.clone());
            p[k] += h;
            m[k] -= h;
            let fd = (f(&prepare(&spec, &p).unwrap()) - f(&prepare(&spec, &m).unwrap())) / (2.0 * h);
            assert!((psr[k] - fd).abs() < 1e-6, "row {row} param {k}: {} vs {fd}", psr[k]);
            assert!((adj[k] - psr[k]).abs() < 1e-10, "row {row} param {k}");
        }
    }
}

#[test]
fn sampled_diagonal_estimator_is_unbiased() {
    let mut r = rng(8);
    let diag: Vec<f64> = (0..16).map(|k| (k as f64 * 0.37).sin() * 3.0).collect();
    let m = SparseMatrix::diagonal(&diag);
    for seed in 0..5 {
        let s = random_state(4, &mut r);
        let shots = 100_000;
        let counts = sample_basis(&s, shots, seed);
        assert_eq!(counts.iter().sum::<usize>(), shots);
        let mean = counts.iter().zip(&diag).map(|(&n, d)| n as f64 * d).sum::<f64>() / shots as f64;
        let exact = exact_expectation(&s, &m).unwrap();
        let var: f64 = s.probabilities().iter().zip(&diag).map(|(p, d)| p * (d - exact).powi(2)).sum();
        let se = (var / shots as f64).sqrt();
        assert!((mean - exact).abs() < 5.0 * se, "seed {seed}: {mean} vs {exact} (se {se})");
    }
}

#[test]
fn sampling_is_reproducible() {
    let s = random_state(3, &mut rng(1));
    assert_eq!(sample_basis(&s, 1000, 7), sample_basis(&s, 1000, 7));
}

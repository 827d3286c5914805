mod common;

use common::{case57, random_vector, rng, two_bus};
use proptest::prelude::*;
use qopf_core::grid::{self, admittance_pattern, assemble_qcqp, pad_to_qubits, ConstraintKind, NetworkCase};
use qopf_core::harness::{solve_case, OracleOptions};
use qopf_core::linalg::C64;
use qopf_core::permutation::SparsityPattern;

/// `(p_n, q_n)` from the rectangular power-flow sums, with `Y` rebuilt from
/// the branch list.
fn scalar_injections(case: &NetworkCase, v: &[C64]) -> Vec<(f64, f64)> {
    let n = case.n();
    let mut g = vec![vec![0.0; n]; n];
    let mut b = vec![vec![0.0; n]; n];
    for br in &case.branches {
        for (i, j) in [(br.from, br.to), (br.to, br.from)] {
            g[i][i] += br.g_series;
            b[i][i] += br.b_series;
            g[i][j] -= br.g_series;
            b[i][j] -= br.b_series;
        }
    }
    (0..n)
        .map(|k| {
            let (ek, fk) = (v[k].re, v[k].im);
            (0..n).fold((0.0, 0.0), |(p, q), m| {
                let (em, fm) = (v[m].re, v[m].im);
                let a = ek * em + fk * fm;
                let c = fk * em - ek * fm;
                (p + g[k][m] * a + b[k][m] * c, q + g[k][m] * c - b[k][m] * a)
            })
        })
        .collect()
}

#[test]
fn injections_match_scalar_power_flow() {
    for case in [two_bus(), case57()] {
        let y = grid::build_admittance(&case);
        let mats: Vec<_> = (0..case.n()).map(|k| grid::injection_matrices(&y, k).unwrap()).collect();
        let mut r = rng(11);
        for _ in 0..100 {
            let v = random_vector(case.n(), &mut r);
            for (k, (p, q)) in scalar_injections(&case, &v).into_iter().enumerate() {
                let (mp, mq) = &mats[k];
                assert!((mp.expectation(&v) - p).abs() < 1e-10, "{} P at bus {k}", case.name);
                assert!((mq.expectation(&v) - q).abs() < 1e-10, "{} Q at bus {k}", case.name);
            }
        }
    }
}

#[test]
fn assembled_matrices_are_hermitian_with_admittance_support() {
    for case in [two_bus(), case57()] {
        let p = assemble_qcqp(&case);
        p.validate().unwrap();
        assert!(p.hermitian_residual() < 1e-12);
        assert!(p.bounds().iter().all(|b| b.is_finite()));
        let y = admittance_pattern(&case);
        assert!(SparsityPattern::of_matrix(&p.m0).is_subset_of(&y));
        for c in &p.constraints {
            assert!(SparsityPattern::of_matrix(&c.matrix).is_subset_of(&y));
        }
    }
}

#[test]
fn equalities_split_into_two_rows() {
    let case = case57();
    let p = assemble_qcqp(&case);
    let count = |k: ConstraintKind| p.labels.iter().filter(|l| l.kind == k).count();
    let loads = case.load_buses().len();
    let gens = case.generator_buses().len();
    assert_eq!(count(ConstraintKind::PowerBalanceP), 2 * loads);
    assert_eq!(count(ConstraintKind::PowerBalanceQ), 2 * loads);
    assert_eq!(count(ConstraintKind::GenLimitP), 2 * gens);
    assert_eq!(count(ConstraintKind::Reference), 2);
    // each upper row has a negated lower twin right after it
    for w in p.constraints.windows(2).zip(p.labels.windows(2)) {
        let (c, l) = w;
        if l[0].kind == ConstraintKind::PowerBalanceP && l[0].kind == l[1].kind && l[0].origin == l[1].origin {
            assert_eq!(c[1].matrix, c[0].matrix.neg());
            assert_eq!(c[1].bound, -c[0].bound);
        }
    }
}

#[test]
fn ieee57_row_counts() {
    let case = case57();
    assert_eq!(case.n(), 57);
    assert_eq!(case.n_edges(), 78);
    let p = assemble_qcqp(&case);
    assert_eq!(p.m(), 422);
    assert_eq!(p.labels.iter().filter(|l| l.kind.is_limit_row()).count(), 220);
    assert_eq!(p.labels.iter().filter(|l| l.kind.is_market_row()).count(), 278);
    let padded = pad_to_qubits(&p);
    assert_eq!((padded.dim(), padded.m()), (64, 512));
}

#[test]
fn oracle_solution_satisfies_split_rows() {
    let case = two_bus();
    let p = assemble_qcqp(&case);
    let sol = solve_case(&case, &OracleOptions::default()).unwrap();
    for (k, r) in p.residuals(&sol.v).iter().enumerate() {
        assert!(*r <= 1e-8, "row {k} violated by {r}");
    }
}

#[test]
fn padding_is_inert() {
    let mut r = rng(5);
    for case in [two_bus(), case57()] {
        let p = assemble_qcqp(&case);
        let padded = pad_to_qubits(&p);
        let v = random_vector(p.dim(), &mut r);
        let lambda: Vec<f64> = (0..p.m()).map(|k| (k % 7) as f64 * 0.3).collect();
        let mut v_pad = v.clone();
        v_pad.resize(padded.dim(), C64::new(0.0, 0.0));
        let mut l_pad = lambda.clone();
        l_pad.resize(padded.m(), 2.5);
        assert_eq!(padded.lagrangian(&v_pad, &l_pad), p.lagrangian(&v, &lambda));
        assert_eq!(padded.objective(&v_pad), p.objective(&v));
    }
}

#[test]
fn qcqp_json_round_trip() {
    let p = assemble_qcqp(&two_bus());
    assert_eq!(grid::QcqpProblem::from_json(&p.to_json()).unwrap(), p);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn case_text_round_trip_is_exact(scales in prop::collection::vec(0.1f64..1.9, 57), cost in 0.0f64..100.0) {
        let mut case = case57();
        for (bus, s) in case.buses.iter_mut().zip(&scales) {
            bus.p_demand *= s;
            bus.q_demand *= s;
        }
        case.generators[0].cost = cost;
        let back = grid::parse_case(&grid::write_case(&case)).unwrap();
        prop_assert_eq!(back, case);
    }

    #[test]
    fn quadratic_forms_are_real_and_hermitian(seed in any::<u64>()) {
        let case = two_bus();
        let p = assemble_qcqp(&case);
        let mut r = rng(seed);
        let v = random_vector(2, &mut r);
        for c in &p.constraints {
            prop_assert!(c.matrix.quad_form(&v).im.abs() < 1e-12);
        }
    }
}

mod common;

use common::{random_problem, rng};
use proptest::prelude::*;
use qopf_core::bounds::{budget_with, circuits_per_iteration, lipschitz_l, sigma_sq, BoundInputs};
use qopf_core::statevector::{random_params, AnsatzSpec};
use qopf_core::variational::{g_operator, DualPoint, EvalMode, LagrangianContext, PrimalPoint};
use rand::Rng;

fn unit_inputs() -> BoundInputs {
    BoundInputs {
        p: 1,
        q: 1,
        alpha_bar: 1.0,
        beta_bar: 1.0,
        norm_m0: 1.0,
        max_norm_mm: 1.0,
        max_abs_b: 1.0,
        piece_norms_m0: 1.0,
        piece_max_norms: 1.0,
        colors: 1,
        rho: 0.0,
        epsilon: 1.0,
        dist0: 1.0,
    }
}

fn context(seed: u64) -> LagrangianContext {
    let problem = random_problem(4, 4, &mut rng(seed));
    LagrangianContext::new(problem, AnsatzSpec::from_table(6, 1, 2).unwrap(), AnsatzSpec::from_table(4, 1, 2).unwrap()).unwrap()
}

fn point(ctx: &LagrangianContext, r: &mut impl Rng, a_bar: f64, b_bar: f64) -> (PrimalPoint, DualPoint) {
    (
        PrimalPoint { theta: random_params(ctx.p(), r.random()), alpha: r.random_range(0.0..=a_bar) },
        DualPoint { phi: random_params(ctx.q(), r.random()), beta: r.random_range(0.0..=b_bar) },
    )
}

fn stacked(p: &PrimalPoint, d: &DualPoint) -> Vec<f64> {
    p.theta.iter().copied().chain([p.alpha]).chain(d.phi.iter().copied()).chain([d.beta]).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn budget_arithmetic() {
    let x = unit_inputs();
    assert_eq!(lipschitz_l(&x), 9.0);
    let b = budget_with(&x, 1.0, 1.0).unwrap();
    assert_eq!(b.iterations, 32);
    assert_eq!(b.shots, 64);
    assert_eq!(circuits_per_iteration(120, 315, 10), 5210);
}

#[test]
fn difference_quotients_stay_below_lipschitz() {
    let mut r = rng(81);
    for seed in 0..3 {
        let ctx = context(seed);
        let (a_bar, b_bar) = (1.5, 1.2);
        let l = lipschitz_l(&BoundInputs::from_context(&ctx, a_bar, b_bar));
        let mut worst: f64 = 0.0;
        for k in 0..1000 {
            let (p1, d1) = point(&ctx, &mut r, a_bar, b_bar);
            // half the pairs are close, to probe the local slope
            let (p2, d2) = if k % 2 == 0 {
                point(&ctx, &mut r, a_bar, b_bar)
            } else {
                let mut p2 = p1.clone();
                let mut d2 = d1.clone();
                p2.theta.iter_mut().chain(d2.phi.iter_mut()).for_each(|t| *t += r.random_range(-1e-3..1e-3));
                p2.alpha = (p2.alpha + r.random_range(-1e-3..1e-3)).clamp(0.0, a_bar);
                d2.beta = (d2.beta + r.random_range(-1e-3..1e-3)).clamp(0.0, b_bar);
                (p2, d2)
            };
            let g1 = g_operator(&ctx, &p1, &d1, EvalMode::Exact, 0).unwrap();
            let g2 = g_operator(&ctx, &p2, &d2, EvalMode::Exact, 0).unwrap();
            let dz = dist(&stacked(&p1, &d1), &stacked(&p2, &d2));
            if dz > 0.0 {
                worst = worst.max(dist(&g1, &g2) / dz);
            }
        }
        assert!(worst <= l, "quotient {worst} exceeds L = {l}");
    }
}

#[test]
fn sampled_variance_is_dominated() {
    let mut r = rng(82);
    let ctx = context(7);
    let (a_bar, b_bar) = (1.5, 1.2);
    let s2 = sigma_sq(&BoundInputs::from_context(&ctx, a_bar, b_bar));
    let shots = 10;
    let reps = 1000;
    for _ in 0..3 {
        let (p, d) = point(&ctx, &mut r, a_bar, b_bar);
        let g = g_operator(&ctx, &p, &d, EvalMode::Exact, 0).unwrap();
        let dev: Vec<f64> = (0..reps)
            .map(|s| dist(&g_operator(&ctx, &p, &d, EvalMode::sampled(shots), s).unwrap(), &g).powi(2))
            .collect();
        let mean = dev.iter().sum::<f64>() / reps as f64;
        let sd = (dev.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        let bound = s2 / shots as f64;
        assert!(mean - 5.0 * sd / (reps as f64).sqrt() <= bound, "E|ĝ−g|² = {mean} vs σ²/S = {bound}");
    }
}

#[test]
fn rho_outside_admissible_interval_is_rejected() {
    let x = BoundInputs { rho: 1.0, ..unit_inputs() };
    assert!(budget_with(&x, 1.0, 1.0).is_err());
    assert!(BoundInputs { epsilon: 0.0, ..unit_inputs() }.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn budget_is_monotone(l in 0.1f64..50.0, s2 in 0.1f64..50.0, f1 in 0.0f64..0.99, f2 in 0.0f64..0.99, e1 in 0.01f64..2.0, e2 in 0.01f64..2.0) {
        let limit = 1.0 / (4.0 * std::f64::consts::SQRT_2 * l);
        let (lo, hi) = (f1.min(f2) * limit, f1.max(f2) * limit);
        let at = |rho: f64, eps: f64| budget_with(&BoundInputs { rho, epsilon: eps, ..unit_inputs() }, l, s2).unwrap();
        let (a, b) = (at(lo, e1), at(hi, e1));
        prop_assert!(a.iterations <= b.iterations && a.shots <= b.shots);
        let (small, large) = (e1.min(e2), e1.max(e2));
        let (c, d) = (at(lo, small), at(lo, large));
        prop_assert!(c.iterations >= d.iterations && c.shots >= d.shots);
    }
}

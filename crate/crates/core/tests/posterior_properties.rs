mod common;

use common::{integrate, kernel_quad, rel_err};
use hibscreen::posterior::{
    effect_posterior, g_shrink, marginal_m1, posterior_kappa_moment, posterior_mean_beta, prob_positive, score_m1,
};
use hibscreen::HIBParams;
use proptest::prelude::*;

fn legal_params() -> impl Strategy<Value = HIBParams> {
    (0.1f64..6.0, 0.1f64..6.0, -1.5f64..1.5, -5.0f64..20.0, 0.3f64..3.0)
        .prop_map(|(a, b, lt, s, sig)| HIBParams::with_sigma(a, b, 10f64.powf(lt), s, sig).unwrap())
}

fn gradient_tuples() -> Vec<HIBParams> {
    [
        (0.5, 1.0, 1.0, 0.0),
        (0.5, 0.5, 1.0, 0.0),
        (1.0, 1.0, 1.0, 0.0),
        (0.5, 1.0, 3.0, 0.0),
        (0.5, 1.0, 0.2, 0.0),
        (2.0, 0.5, 1.0, 1.0),
        (0.3, 2.0, 10.0, -1.0),
        (1.5, 1.5, 0.5, 2.0),
        (4.0, 0.2, 20.0, 0.0),
        (0.8, 3.0, 1.7, -2.5),
    ]
    .iter()
    .map(|&(a, b, t, s)| HIBParams::new(a, b, t, s).unwrap())
    .collect()
}

#[test]
fn posterior_mean_equals_data_plus_score_by_finite_differences() {
    let h = 1e-4;
    for p in gradient_tuples() {
        for i in -10..=10 {
            let y = f64::from(i);
            let lm = |y: f64| marginal_m1(y, &p).unwrap().ln();
            let fd = (lm(y + h) - lm(y - h)) / (2.0 * h);
            let gap = posterior_mean_beta(y, &p).unwrap() - y;
            assert!((gap - fd).abs() < 1e-6, "{p:?} at y = {y}: {gap} vs {fd}");
        }
    }
}

#[test]
fn score_carries_noise_variance_factor() {
    // E(β|y) = y + σ² d/dy ln m₁(y)
    let p = HIBParams::with_sigma(0.5, 1.0, 1.0, 0.0, 2.5).unwrap();
    let h = 1e-4;
    for &y in &[-7.0, -1.0, 0.4, 3.0, 12.0] {
        let lm = |y: f64| marginal_m1(y, &p).unwrap().ln();
        let fd = (lm(y + h) - lm(y - h)) / (2.0 * h);
        assert!((score_m1(y, &p).unwrap() - fd).abs() < 1e-6);
        let gap = posterior_mean_beta(y, &p).unwrap() - y;
        assert!((gap - 6.25 * fd).abs() < 1e-5);
    }
}

#[test]
fn strawderman_shrinkage_gap_vanishes_in_the_tail() {
    let p = HIBParams::strawderman();
    let gap = |y: f64| y - posterior_mean_beta(y, &p).unwrap();
    let grid: Vec<f64> = (0..=96).map(|i| 6.0 + 0.25 * f64::from(i)).collect();
    for w in grid.windows(2) {
        assert!(
            gap(w[1]) < gap(w[0]),
            "gap not decreasing between {} and {}",
            w[0],
            w[1]
        );
    }
    assert!(gap(20.0) < 0.2);
}

#[test]
fn score_is_redescending() {
    let p = HIBParams::strawderman();
    assert!(score_m1(10.0, &p).unwrap().abs() < score_m1(5.0, &p).unwrap().abs());
}

#[test]
fn shrinkage_decreases_with_evidence() {
    for p in gradient_tuples() {
        let mut prev = f64::INFINITY;
        for i in 0..=20 {
            let e = posterior_kappa_moment(1, 0.5 * f64::from(i), &p).unwrap();
            assert!(e < prev, "{p:?} at y = {}", 0.5 * f64::from(i));
            prev = e;
        }
    }
}

#[test]
fn marginal_integrates_to_one() {
    // tails decay like |y|^{−(2a+1)}; a = 2 leaves < 1e-7 outside ±60
    for &(a, b, t, s, sig) in &[
        (2.0, 1.0, 1.0, 0.0, 1.0),
        (3.0, 0.5, 2.0, 1.0, 0.7),
        (2.5, 2.0, 0.5, -1.0, 1.0),
    ] {
        let p = HIBParams::with_sigma(a, b, t, s, sig).unwrap();
        let total = integrate(
            |y: f64| marginal_m1(y, &p).unwrap().value(),
            -60.0 * sig,
            60.0 * sig,
            1e-11,
        );
        assert!((total - 1.0).abs() < 1e-6, "{p:?}: {total}");
    }
}

#[test]
fn g_shrink_matches_quadrature_and_one_dimensional_case() {
    let p = HIBParams::strawderman();
    let (z, dim) = (50.0, 10usize);
    let a = p.a() + 0.5 * dim as f64;
    let s = p.s() + 0.5 * z;
    let want = kernel_quad(a, p.b(), p.tau(), s, |k| k) / kernel_quad(a, p.b(), p.tau(), s, |_| 1.0);
    assert!(rel_err(g_shrink(z, dim, &p).unwrap(), want) < 1e-8);

    for &y in &[-4.0, 0.3, 2.0, 9.0] {
        let est = (1.0 - g_shrink(y * y, 1, &p).unwrap()) * y;
        assert!(rel_err(est, posterior_mean_beta(y, &p).unwrap()) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mean_preserves_sign_and_contracts(p in legal_params(), y in -30.0f64..30.0) {
        prop_assume!(y.abs() > 1e-6);
        let m = posterior_mean_beta(y, &p).unwrap();
        prop_assert!(m * y > 0.0);
        prop_assert!(m.abs() < y.abs());
    }

    #[test]
    fn masreliez_identity_is_exact(p in legal_params(), y in -30.0f64..30.0) {
        let lhs = posterior_mean_beta(y, &p).unwrap();
        let rhs = y + p.sigma() * p.sigma() * score_m1(y, &p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + y.abs()));
    }

    #[test]
    fn effect_posterior_invariants(p in legal_params(), y in -30.0f64..30.0) {
        let e = effect_posterior(y, &p).unwrap();
        prop_assert!(e.e_kappa > 0.0 && e.e_kappa < 1.0);
        prop_assert!(e.var_kappa <= e.e_kappa * (1.0 - e.e_kappa));
        prop_assert!((e.post_mean_beta - (1.0 - e.e_kappa) * y).abs() <= 1e-15 * y.abs());
        prop_assert!(e.post_var_beta >= 0.0);
        prop_assert!((0.0..=1.0).contains(&e.prob_positive));
        prop_assert!((e.log_marginal_m1 - marginal_m1(y, &p).unwrap().ln()).abs() < 1e-12);
    }

    #[test]
    fn marginal_is_symmetric(p in legal_params(), y in 0.0f64..40.0) {
        let l = marginal_m1(y, &p).unwrap().ln();
        let r = marginal_m1(-y, &p).unwrap().ln();
        prop_assert_eq!(l, r);
    }

    #[test]
    fn sign_probability_is_antisymmetric(p in legal_params(), y in -15.0f64..15.0) {
        let up = prob_positive(y, &p).unwrap();
        let down = prob_positive(-y, &p).unwrap();
        prop_assert!((up + down - 1.0).abs() < 1e-12);
        let on_right_side = if y > 0.0 { up >= 0.5 } else { up <= 0.5 };
        prop_assert!(on_right_side);
    }

    #[test]
    fn g_shrink_lies_in_unit_interval(p in legal_params(), z in 0.0f64..500.0, dim in 1usize..50) {
        let g = g_shrink(z, dim, &p).unwrap();
        prop_assert!(g > 0.0 && g < 1.0);
    }
}

mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stfbc::channel::Deployment;
use stfbc::clustering::{Cluster, ClusterAssignment};
use stfbc::rates::{
    closed_form_log2_mean, exp_integral_ei, hypoexp_pdf, laplace_log2_mean, pq_polynomials, EigenGroups,
    RateEngine,
};

// mpmath, 30 digits
const EI_REFERENCE: &[(f64, f64)] = &[
    (-1e-3, -6.3315393641361493112),
    (-0.1, -1.8229239584193906159),
    (-1.0, -0.21938393439552027368),
    (-2.5, -0.024914917870269735496),
    (-5.9, -0.00040390350894312922631),
    (-6.1, -0.00032108702794965483304),
    (-10.0, -4.1569689296853242774e-6),
    (-30.0, -3.0215520106888125448e-15),
    (-100.0, -3.6835977616820321802e-46),
];

#[test]
fn ei_matches_reference_table() {
    for &(x, want) in EI_REFERENCE {
        let got = exp_integral_ei(x).unwrap();
        assert!(((got - want) / want).abs() < 1e-12, "Ei({x}) = {got}, want {want}");
    }
}

#[test]
fn ei_by_quadrature() {
    // Ei(x) = -∫_1^∞ e^{x t} / t dt for x < 0
    for x in [-0.3, -2.0, -7.0] {
        let q = -quad(|t: f64| (x * t).exp() / t, &[1.0, 2.0, 5.0, 20.0, 100.0, 2000.0], 1e-15);
        let got = exp_integral_ei(x).unwrap();
        assert!(((got - q) / q).abs() < 1e-10, "x={x}: {got} vs {q}");
    }
}

#[test]
fn erlang_closed_form_vs_quadrature() {
    let pq = pq_polynomials(8);
    for u in 1..=8 {
        for lambda in [0.1, 1.0, 10.0] {
            let (cf, _) = pq.erlang_log2_mean(u, lambda);
            let q = erlang_log2_mean_quad(u, lambda);
            assert!((cf - q).abs() < 1e-8, "u={u} λ={lambda}: {cf} vs {q}");
        }
    }
}

#[test]
fn pdf_normalizes_and_matches_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let g = random_groups(&mut rng, true);
        assert!((hypoexp_mass_quad(&g) - 1.0).abs() < 1e-8, "{g:?}");
    }
    // Exp(a) * Erlang(2, b) convolved numerically
    let (a, b) = (0.7, 2.3);
    let g = EigenGroups {
        lambdas: vec![a, b],
        multiplicities: vec![1, 2],
    };
    for y in [0.2, 1.0, 3.5] {
        let conv = quad(
            |x: f64| a * (-a * x).exp() * b * b * (y - x) * (-b * (y - x)).exp(),
            &[0.0, y / 2.0, y],
            1e-15,
        );
        assert!((hypoexp_pdf(y, &g) - conv).abs() < 1e-12, "y={y}");
    }
}

#[test]
fn closed_form_vs_pdf_quadrature() {
    let pq = pq_polynomials(12);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let g = random_groups(&mut rng, true);
        let cf = closed_form_log2_mean(&g, &pq).unwrap().value;
        let q = hypoexp_log2_mean_quad(&g);
        assert!((cf - q).abs() < 1e-8 * q.max(1.0), "{g:?}: {cf} vs {q}");
        assert!((laplace_log2_mean(&g) - q).abs() < 1e-8 * q.max(1.0));
    }
}

#[test]
fn near_coincident_rates_stay_continuous() {
    let engine = RateEngine::new(1.0, 1.0, 2);
    let exact = engine.log2_mean(&EigenGroups {
        lambdas: vec![1.0],
        multiplicities: vec![2],
    });
    for eps in [1e-3, 1e-5, 1e-7, 1e-9] {
        let (v, _) = engine.log2_mean(&EigenGroups {
            lambdas: vec![1.0 + eps, 1.0],
            multiplicities: vec![1, 1],
        });
        assert!((v - exact.0).abs() < 2.0 * eps + 1e-9, "eps={eps}: {v} vs {}", exact.0);
    }
}

fn two_user_scene(cross: f64) -> (Deployment, ClusterAssignment) {
    let beta = vec![vec![1e-8, cross], vec![cross, 1e-8], vec![2e-9, cross]];
    let dep = Deployment::from_gains(&beta, 1, 1, 0.5, 0.5).unwrap();
    let assignment = ClusterAssignment {
        clusters: vec![Cluster::new(vec![0, 2], vec![0]), Cluster::new(vec![1], vec![1])],
        unused_antennas: Default::default(),
    };
    (dep, assignment)
}

#[test]
fn rate_decreases_with_interference() {
    let engine = RateEngine::new(0.2, 6.3e-12, 1);
    let mut last = f64::INFINITY;
    for cross in [1e-12, 1e-11, 1e-10, 1e-9, 1e-8] {
        let (dep, a) = two_user_scene(cross);
        let se = engine.ergodic_se_user(0, &a, &dep).unwrap().se;
        assert!(se < last, "cross={cross}: {se} !< {last}");
        last = se;
    }
}

#[test]
fn per_symbol_values_are_equal() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let engine = RateEngine::new(0.2, 6.3e-12, 2);
    for n_rx in [1, 2] {
        for _ in 0..10 {
            let s = random_scene(&mut rng, n_rx);
            let vals = engine.per_symbol_values(0, &s.assignment, &s.dep).unwrap();
            for v in &vals {
                assert!((v - vals[0]).abs() < 1e-12 * vals[0].abs().max(1.0), "{vals:?}");
            }
        }
    }
}

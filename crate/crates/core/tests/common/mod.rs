#![allow(dead_code)]

use std::f64::consts::LOG2_E;

use rand::Rng;
use stfbc::channel::Deployment;
use stfbc::clustering::{Cluster, ClusterAssignment};
use stfbc::rates::{hypoexp_pdf, EigenGroups};

/// Double-exponential quadrature over consecutive breakpoints.
pub fn quad(f: impl Fn(f64) -> f64, breaks: &[f64], tol: f64) -> f64 {
    breaks
        .windows(2)
        .map(|w| quadrature::integrate(&f, w[0], w[1], tol).integral)
        .sum()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `E[log2(1+X)]` for `X ~ Erlang(u, λ)` by quadrature in `s = λ y`.
pub fn erlang_log2_mean_quad(u: usize, lambda: f64) -> f64 {
    let pdf = |s: f64| s.powi(u as i32 - 1) * (-s).exp() / factorial(u - 1);
    quad(
        |s| pdf(s) * (s / lambda).ln_1p() * LOG2_E,
        &[0.0, 0.5, 2.0, 6.0, 15.0, 40.0, 100.0, 250.0],
        1e-14,
    )
}

/// Breakpoints covering the bulk of a hypo-exponential density.
pub fn hypoexp_breaks(groups: &EigenGroups) -> Vec<f64> {
    let lmin = groups.lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = groups.dimension() as f64 / lmin;
    [0.0, 0.02, 0.1, 0.3, 1.0, 2.5, 6.0, 15.0, 40.0, 100.0]
        .iter()
        .map(|x| x * scale)
        .collect()
}

pub fn hypoexp_mass_quad(groups: &EigenGroups) -> f64 {
    quad(|y| hypoexp_pdf(y, groups), &hypoexp_breaks(groups), 1e-13)
}

pub fn hypoexp_log2_mean_quad(groups: &EigenGroups) -> f64 {
    quad(
        |y| hypoexp_pdf(y, groups) * y.ln_1p() * LOG2_E,
        &hypoexp_breaks(groups),
        1e-13,
    )
}

/// Random rates with 1-3 groups of multiplicity 1-3.
pub fn random_groups<R: Rng>(rng: &mut R, allow_repeats: bool) -> EigenGroups {
    let n = rng.random_range(1..=3);
    let mut lambdas: Vec<f64> = Vec::new();
    while lambdas.len() < n {
        let l = 10f64.powf(rng.random_range(-1.0..1.0));
        if lambdas.iter().all(|x| (x - l).abs() > 0.05 * x.max(l)) {
            lambdas.push(l);
        }
    }
    let multiplicities = (0..n)
        .map(|_| if allow_repeats { rng.random_range(1..=3) } else { 1 })
        .collect();
    EigenGroups {
        lambdas,
        multiplicities,
    }
}

/// A single-cluster scene: `a` antennas (one per RU) serving user 0, plus
/// interfering singleton clusters for the remaining users.
pub struct Scene {
    pub dep: Deployment,
    pub assignment: ClusterAssignment,
}

pub fn random_scene<R: Rng>(rng: &mut R, n_rx: usize) -> Scene {
    let a = rng.random_range(1..=4);
    let interferers = rng.random_range(0..=3);
    let m = a + interferers;
    let k = 1 + interferers;
    let beta: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..k).map(|_| 10f64.powf(rng.random_range(-9.5..-7.0))).collect())
        .collect();
    let rho_tx = rng.random_range(0.0..0.9);
    let rho_rx = rng.random_range(0.0..0.9);
    let dep = Deployment::from_gains(&beta, 1, n_rx, rho_tx, rho_rx).unwrap();
    let mut clusters = vec![Cluster::new((0..a).collect(), vec![0])];
    for j in 0..interferers {
        clusters.push(Cluster::new(vec![a + j], vec![1 + j]));
    }
    Scene {
        dep,
        assignment: ClusterAssignment {
            clusters,
            unused_antennas: Default::default(),
        },
    }
}

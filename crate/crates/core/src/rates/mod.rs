//! Closed-form ergodic spectral efficiency of clustered users.

mod hypoexp;
mod pq;
mod special;

pub use hypoexp::{
    closed_form_log2_mean, eigen_groups, hypoexp_pdf, laplace_log2_mean, phi_coefficient, ClosedForm,
    EigenGroups,
};
pub use pq::PqPolynomials;
pub use special::{exp_integral_ei, scaled_e1};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::Deployment;
use crate::clustering::ClusterAssignment;
use crate::codes::get_code;
use crate::config::SimConfig;
use crate::error::{Error, Result};

/// Builds the polynomial table to `j_max`.
pub fn pq_polynomials(j_max: usize) -> PqPolynomials {
    PqPolynomials::new(j_max)
}

/// Mean out-of-cluster power seen by every user antenna over one
/// accounting window, per unit transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceProfile {
    per_antenna: Vec<f64>,
    n_per_ue: usize,
}

impl InterferenceProfile {
    pub fn at(&self, k: usize, _n: usize) -> f64 {
        self.per_antenna[k]
    }

    /// Sum over the user's receive antennas.
    pub fn user_total(&self, k: usize) -> f64 {
        self.per_antenna[k] * self.n_per_ue as f64
    }

    pub fn k_ues(&self) -> usize {
        self.per_antenna.len()
    }
}

/// Interference at user `k` (per receive antenna): every other cluster sends
/// `P * T0 / T` symbols per window, each through all of its antennas.
pub fn user_interference(k: usize, assignment: &ClusterAssignment, dep: &Deployment) -> f64 {
    assignment
        .clusters
        .iter()
        .filter(|c| !c.ues.contains(&k))
        .map(|c| {
            let symbols = (c.code().p_syms() * c.repeats()) as f64;
            let gain: f64 = c.antennas.iter().map(|&a| dep.beta(dep.ru_of(a), k)).sum();
            symbols * gain
        })
        .sum()
}

pub fn interference_profile(assignment: &ClusterAssignment, dep: &Deployment) -> InterferenceProfile {
    InterferenceProfile {
        per_antenna: (0..dep.k_ues()).map(|k| user_interference(k, assignment, dep)).collect(),
        n_per_ue: dep.n_per_ue,
    }
}

/// How a rate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evaluation {
    ClosedForm,
    /// Ill-conditioned rates; evaluated by numerical integration instead.
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserRate {
    pub se: f64,
    pub evaluation: Evaluation,
}

impl UserRate {
    pub fn is_fallback(&self) -> bool {
        self.evaluation != Evaluation::ClosedForm
    }
}

/// Minimum relative gap between distinct rates before the closed form is
/// abandoned.
const MIN_REL_GAP: f64 = 1e-6;
/// Largest tolerated round-off estimate relative to the result.
const MAX_REL_ERROR: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct RateEngine {
    pub p_t: f64,
    pub noise_var: f64,
    pub rel_tol: f64,
    pq: PqPolynomials,
}

impl RateEngine {
    /// Polynomials are tabulated to `4 * max_n_per_ue`, the largest
    /// covariance dimension a cluster can produce.
    pub fn new(p_t: f64, noise_var: f64, max_n_per_ue: usize) -> Self {
        RateEngine {
            p_t,
            noise_var,
            rel_tol: 1e-9,
            pq: PqPolynomials::new(4 * max_n_per_ue.max(1)),
        }
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn from_config(cfg: &SimConfig) -> Self {
        Self::new(cfg.p_t_watts, cfg.noise_variance(), cfg.n_per_ue).with_rel_tol(cfg.eigen_rel_tol)
    }

    /// `E[log2(1 + Y)]` for grouped rates, with the numerical guard.
    pub fn log2_mean(&self, groups: &EigenGroups) -> (f64, Evaluation) {
        if groups.min_gap() >= MIN_REL_GAP * groups.max_lambda() {
            if let Some(cf) = closed_form_log2_mean(groups, &self.pq) {
                if cf.value.is_finite() && cf.error_estimate <= MAX_REL_ERROR * cf.value.abs() {
                    return (cf.value, Evaluation::ClosedForm);
                }
            }
        }
        (laplace_log2_mean(groups), Evaluation::Quadrature)
    }

    /// `E[log2(1 + x^H x P_t / (I P_t + sigma^2))]` for `x ~ CN(0, cov)`.
    pub fn symbol_log2_mean(&self, cov: &DMatrix<f64>, interference: f64) -> Result<(f64, Evaluation)> {
        if !(interference >= 0.0) {
            return Err(Error::Domain {
                function: "interference",
                value: interference,
            });
        }
        let scale = (interference * self.p_t + self.noise_var) / self.p_t;
        let groups = eigen_groups(cov, scale, self.rel_tol)?;
        Ok(self.log2_mean(&groups))
    }

    fn user_rate(&self, k: usize, assignment: &ClusterAssignment, dep: &Deployment, interference: f64) -> Result<UserRate> {
        let (c, pos) = assignment
            .cluster_of_user(k)
            .ok_or_else(|| Error::Config(format!("user {k} is not in any cluster")))?;
        let cl = &assignment.clusters[c];
        let cov = dep.user_covariance(k, &cl.antennas);
        let (value, evaluation) = self.symbol_log2_mean(&cov, interference * dep.n_per_ue as f64)?;
        let share = cl.symbols_per_frame(pos) as f64 / assignment.t0() as f64;
        Ok(UserRate {
            se: share * value,
            evaluation,
        })
    }

    pub fn ergodic_se_user(&self, k: usize, assignment: &ClusterAssignment, dep: &Deployment) -> Result<UserRate> {
        self.user_rate(k, assignment, dep, user_interference(k, assignment, dep))
    }

    pub fn ergodic_se_all(&self, assignment: &ClusterAssignment, dep: &Deployment) -> Result<Vec<UserRate>> {
        let profile = interference_profile(assignment, dep);
        (0..dep.k_ues())
            .map(|k| self.user_rate(k, assignment, dep, profile.at(k, 0)))
            .collect()
    }

    /// Per-symbol `E[log2(1 + SINR)]` for every symbol of user `k` in one
    /// code block, each built from that symbol's own column.
    pub fn per_symbol_values(&self, k: usize, assignment: &ClusterAssignment, dep: &Deployment) -> Result<Vec<f64>> {
        let (c, pos) = assignment
            .cluster_of_user(k)
            .ok_or_else(|| Error::Config(format!("user {k} is not in any cluster")))?;
        let cl = &assignment.clusters[c];
        let spec = get_code(cl.code());
        let interference = user_interference(k, assignment, dep) * dep.n_per_ue as f64;
        cl.symbols_of(pos)
            .into_iter()
            .map(|p| {
                let antennas: Vec<usize> = spec.columns[p].iter().map(|e| cl.antennas[e.antenna]).collect();
                let cov = dep.user_covariance(k, &antennas);
                Ok(self.symbol_log2_mean(&cov, interference)?.0)
            })
            .collect()
    }
}

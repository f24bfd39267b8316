//! Sums of independent exponentials with grouped rates.
//!
//! `Y = x^H x / s` with `x ~ CN(0, R)` is distributed as a sum of independent
//! `Exp(λ_j)` with `λ_j = s / μ_j`, `μ_j` the eigenvalues of `R`. Equal rates
//! are grouped into Erlang blocks of multiplicity `u_j`.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;

use super::pq::PqPolynomials;
use crate::error::{Error, Result};

/// Distinct rates and their multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenGroups {
    pub lambdas: Vec<f64>,
    pub multiplicities: Vec<usize>,
}

impl EigenGroups {
    pub fn dimension(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    /// Smallest gap between distinct rates; `+inf` for a single group.
    pub fn min_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for i in 0..self.lambdas.len() {
            for j in i + 1..self.lambdas.len() {
                gap = gap.min((self.lambdas[i] - self.lambdas[j]).abs());
            }
        }
        gap
    }

    pub fn max_lambda(&self) -> f64 {
        self.lambdas.iter().cloned().fold(0.0, f64::max)
    }

    /// Builds groups from rates directly, merging values within
    /// `rel_tol * max`.
    pub fn from_lambdas(lambdas: &[f64], rel_tol: f64) -> Result<Self> {
        if let Some(&bad) = lambdas.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(Error::NonPositiveEigenvalue(bad));
        }
        let max = lambdas.iter().cloned().fold(0.0, f64::max);
        let tol = rel_tol * max;
        let mut sorted: Vec<f64> = lambdas.to_vec();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut out = EigenGroups {
            lambdas: Vec::new(),
            multiplicities: Vec::new(),
        };
        let mut start = 0;
        while start < sorted.len() {
            let mut end = start + 1;
            while end < sorted.len() && sorted[start] - sorted[end] <= tol {
                end += 1;
            }
            let group = &sorted[start..end];
            out.lambdas.push(group.iter().sum::<f64>() / group.len() as f64);
            out.multiplicities.push(group.len());
            start = end;
        }
        Ok(out)
    }
}

/// Eigen-decomposes a covariance and returns grouped rates `scale / μ`,
/// ordered by ascending eigenvalue.
pub fn eigen_groups(r_k: &DMatrix<f64>, scale: f64, rel_tol: f64) -> Result<EigenGroups> {
    if r_k.nrows() != r_k.ncols() || r_k.nrows() == 0 {
        return Err(Error::LengthMismatch {
            expected: r_k.nrows(),
            got: r_k.ncols(),
        });
    }
    if !(scale > 0.0) {
        return Err(Error::NonPositiveEigenvalue(scale));
    }
    let mu = r_k.clone().symmetric_eigenvalues();
    let mu_max = mu.iter().cloned().fold(0.0, f64::max);
    if let Some(&bad) = mu.iter().find(|m| !(**m > 1e-13 * mu_max)) {
        return Err(Error::NonPositiveEigenvalue(bad));
    }
    let lambdas: Vec<f64> = mu.iter().map(|m| scale / m).collect();
    EigenGroups::from_lambdas(&lambdas, rel_tol)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Calls `f` with every composition of `total` into `parts` non-negative
/// integers.
fn for_each_composition(total: usize, parts: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(rem: usize, idx: usize, buf: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if idx + 1 == buf.len() {
            buf[idx] = rem;
            f(buf);
            return;
        }
        for v in 0..=rem {
            buf[idx] = v;
            rec(rem - v, idx + 1, buf, f);
        }
    }
    if parts == 0 {
        if total == 0 {
            f(&[]);
        }
        return;
    }
    let mut buf = vec![0; parts];
    rec(total, 0, &mut buf, f);
}

/// Partial-fraction coefficient for group `k` (0-based) and order `ell`
/// (1-based, up to `u_k`).
pub fn phi_coefficient(k: usize, ell: usize, groups: &EigenGroups) -> f64 {
    let lk = groups.lambdas[k];
    let others: Vec<usize> = (0..groups.lambdas.len()).filter(|&j| j != k).collect();
    let n = ell - 1;
    let mut sum = 0.0;
    for_each_composition(n, others.len(), &mut |comp| {
        let mut term = 1.0;
        for (&j, &i) in others.iter().zip(comp) {
            let u = groups.multiplicities[j];
            term *= binomial(u + i - 1, i) * (groups.lambdas[j] - lk).powi(-((u + i) as i32));
        }
        sum += term;
    });
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sign * factorial(n) * sum
}

fn rate_product(groups: &EigenGroups) -> f64 {
    groups
        .lambdas
        .iter()
        .zip(&groups.multiplicities)
        .map(|(l, &u)| l.powi(u as i32))
        .product()
}

/// Density of the grouped hypo-exponential sum at `y >= 0`.
pub fn hypoexp_pdf(y: f64, groups: &EigenGroups) -> f64 {
    if y < 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (r, (&lr, &ur)) in groups.lambdas.iter().zip(&groups.multiplicities).enumerate() {
        for ell in 1..=ur {
            let pw = ur - ell;
            acc += phi_coefficient(r, ell, groups) * y.powi(pw as i32) * (-lr * y).exp()
                / (factorial(pw) * factorial(ell - 1));
        }
    }
    rate_product(groups) * acc
}

/// Closed-form `E[log2(1 + Y)]` plus a round-off estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    pub value: f64,
    pub error_estimate: f64,
}

/// Evaluates the partial-fraction expansion term by term with the Erlang
/// closed form. Fails if a multiplicity exceeds the polynomial table.
pub fn closed_form_log2_mean(groups: &EigenGroups, pq: &PqPolynomials) -> Option<ClosedForm> {
    let prod = rate_product(groups);
    let mut value = 0.0;
    let mut abs_terms = 0.0;
    let mut err = 0.0;
    for (r, (&lr, &ur)) in groups.lambdas.iter().zip(&groups.multiplicities).enumerate() {
        if ur > pq.j_max() {
            return None;
        }
        for ell in 1..=ur {
            let v = ur - ell + 1;
            let coef =
                prod * phi_coefficient(r, ell, groups) / (lr.powi(v as i32) * factorial(ell - 1));
            let (f, f_scale) = pq.erlang_log2_mean(v, lr);
            let term = coef * f;
            value += term;
            abs_terms += term.abs();
            err += coef.abs() * f_scale;
        }
    }
    let error_estimate = f64::EPSILON * (abs_terms + err) * 4.0;
    Some(ClosedForm {
        value,
        error_estimate,
    })
}

/// `E[log2(1 + Y)]` from the Laplace transform,
/// `E[ln(1+Y)] = ∫_0^∞ e^{-s} (1 - Π (1 + s/λ_j)^{-u_j}) / s ds`,
/// with `s = e^t` and the trapezoid rule on `t`.
pub fn laplace_log2_mean(groups: &EigenGroups) -> f64 {
    let lead: f64 = groups
        .lambdas
        .iter()
        .zip(&groups.multiplicities)
        .map(|(l, &u)| u as f64 / l)
        .sum();
    let t_lo = (1e-18 / lead).ln();
    let t_hi = 50f64.ln();
    let h = 0.05;
    let n = ((t_hi - t_lo) / h).ceil() as usize;
    let h = (t_hi - t_lo) / n as f64;
    let mut sum = 0.0;
    for i in 0..=n {
        let s = (t_lo + i as f64 * h).exp();
        let log_m: f64 = groups
            .lambdas
            .iter()
            .zip(&groups.multiplicities)
            .map(|(l, &u)| -(u as f64) * (s / l).ln_1p())
            .sum();
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        sum += w * (-s).exp() * -log_m.exp_m1();
    }
    sum * h / LN_2
}

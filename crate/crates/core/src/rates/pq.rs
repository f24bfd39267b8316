//! Polynomials behind the closed form of `E[log2(1 + X)]` for an
//! Erlang-distributed `X`.
//!
//! `P_1 = 1`, `Q_1 = 0` and for `i >= 1`
//!
//! ```text
//! P_{i+1}(x) = (x/i - 1) P_i(x) + (x/i) P_i'(x)
//! Q_{i+1}(x) = Q_i(x) - (-1)^i P_i(x) / i - (x/i) Q_i'(x)
//! ```

use std::f64::consts::LOG2_E;

use super::special::scaled_e1;

/// Coefficient tables, lowest power first.
#[derive(Debug, Clone, PartialEq)]
pub struct PqPolynomials {
    p: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn horner_abs(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x.abs() + c.abs())
}

impl PqPolynomials {
    pub fn new(j_max: usize) -> Self {
        let j_max = j_max.max(1);
        let mut p = vec![vec![1.0]];
        let mut q = vec![vec![0.0]];
        for i in 1..j_max {
            let inv = 1.0 / i as f64;
            let (pi, qi) = (&p[i - 1], &q[i - 1]);
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let mut np = vec![0.0; pi.len() + 1];
            for (j, c) in pi.iter().enumerate() {
                np[j + 1] += c * inv;
                np[j] += c * (j as f64 * inv - 1.0);
            }
            let mut nq = vec![0.0; qi.len().max(pi.len())];
            for (j, c) in qi.iter().enumerate() {
                nq[j] += c * (1.0 - j as f64 * inv);
            }
            for (j, c) in pi.iter().enumerate() {
                nq[j] -= sign * c * inv;
            }
            p.push(np);
            q.push(nq);
        }
        PqPolynomials { p, q }
    }

    pub fn j_max(&self) -> usize {
        self.p.len()
    }

    /// Coefficients of `P_j`, `j >= 1`.
    pub fn p(&self, j: usize) -> &[f64] {
        &self.p[j - 1]
    }

    pub fn q(&self, j: usize) -> &[f64] {
        &self.q[j - 1]
    }

    /// `E[log2(1 + X)]` for `X ~ Gamma(u, rate lambda)`:
    /// `log2(e) [(-1)^u P_u(λ) e^λ Ei(-λ) + Q_u(λ)]`.
    ///
    /// Also returns a bound on the magnitude of the cancelling terms, used to
    /// estimate round-off.
    pub fn erlang_log2_mean(&self, u: usize, lambda: f64) -> (f64, f64) {
        let s = scaled_e1(lambda);
        // (-1)^u e^λ Ei(-λ) = (-1)^(u+1) e^λ E1(λ)
        let sign = if u % 2 == 0 { -1.0 } else { 1.0 };
        let pv = horner(self.p(u), lambda);
        let qv = horner(self.q(u), lambda);
        let value = LOG2_E * (sign * pv * s + qv);
        let scale = LOG2_E * (horner_abs(self.p(u), lambda) * s + horner_abs(self.q(u), lambda));
        (value, scale)
    }
}

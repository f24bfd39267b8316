//! Deployments, large-scale gains and correlated Rayleigh channels.
//!
//! Antennas are addressed globally as `a = m * L + l` (RU `m`, RU antenna
//! `l`). The covariance of the `L * N` coefficients of link `(m, k)` is
//! `beta[m][k] * (T ⊗ R)` with exponential Toeplitz factors
//! `T[i][j] = rho_tx^|i-j|` and `R[i][j] = rho_rx^|i-j|`, stacked with the
//! RU antenna index major. Different links are independent.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{PathlossBranch, SimConfig};
use crate::error::{Error, Result};
use crate::rng::complex_normal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathlossParams {
    pub carrier_ghz: f64,
    pub branch: PathlossBranch,
    pub shadowing: bool,
}

impl PathlossParams {
    pub fn shadow_sigma_db(&self) -> f64 {
        match self.branch {
            PathlossBranch::Los => 4.3,
            PathlossBranch::Nlos => 5.7,
        }
    }
}

/// Median pathloss in dB (no shadowing).
pub fn pathloss_db(distance_3d: f64, params: &PathlossParams) -> Result<f64> {
    if !(distance_3d > 0.0) {
        return Err(Error::NonPositiveDistance(distance_3d));
    }
    let f = params.carrier_ghz.log10();
    let los = 31.84 + 21.5 * distance_3d.log10() + 19.0 * f;
    Ok(match params.branch {
        PathlossBranch::Los => los,
        PathlossBranch::Nlos => los.max(33.0 + 25.5 * distance_3d.log10() + 20.0 * f),
    })
}

/// Linear power gain `10^(-PL/10)`, with log-normal shadowing when enabled.
pub fn pathloss_linear<R: Rng + ?Sized>(
    distance_3d: f64,
    params: &PathlossParams,
    rng: &mut R,
) -> Result<f64> {
    let mut pl = pathloss_db(distance_3d, params)?;
    if params.shadowing {
        let shadow = Normal::new(0.0, params.shadow_sigma_db()).expect("positive sigma");
        pl += shadow.sample(rng);
    }
    Ok(10f64.powf(-pl / 10.0))
}

/// Thermal noise power in watts for the given bandwidth and noise figure.
pub fn noise_variance(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    let dbm = -174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db;
    10f64.powf((dbm - 30.0) / 10.0)
}

fn toeplitz(size: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(size, size, |i, j| rho.powi(i.abs_diff(j) as i32))
}

/// `beta * (T ⊗ R)` for `l` RU antennas and `n` UE antennas.
pub fn build_correlation(beta: f64, l: usize, n: usize, rho_tx: f64, rho_rx: f64) -> Result<DMatrix<f64>> {
    for rho in [rho_tx, rho_rx] {
        if !(rho.abs() < 1.0) {
            return Err(Error::InvalidCorrelation(rho));
        }
    }
    Ok(toeplitz(l, rho_tx).kronecker(&toeplitz(n, rho_rx)) * beta)
}

/// Positions, large-scale gains and correlation structure of one drop.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub ru_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
    pub l_per_ru: usize,
    pub n_per_ue: usize,
    pub rho_tx: f64,
    pub rho_rx: f64,
    /// Row-major `M x K`.
    beta: Vec<f64>,
    /// Cholesky factor of the unit-gain link covariance `T ⊗ R`.
    unit_factor: DMatrix<f64>,
}

impl Deployment {
    /// Builds a deployment from a gain table `beta[m][k]` (rows are RUs).
    /// Positions are left at the origin.
    pub fn from_gains(beta: &[Vec<f64>], l_per_ru: usize, n_per_ue: usize, rho_tx: f64, rho_rx: f64) -> Result<Self> {
        let m = beta.len();
        let k = beta.first().map_or(0, Vec::len);
        if beta.iter().any(|row| row.len() != k) {
            return Err(Error::Parse("ragged gain table".into()));
        }
        if let Some(&b) = beta.iter().flatten().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::Parse(format!("large-scale gains must be positive, got {b}")));
        }
        let unit = build_correlation(1.0, l_per_ru, n_per_ue, rho_tx, rho_rx)?;
        let unit_factor = unit.cholesky().ok_or(Error::Factorization)?.l();
        Ok(Deployment {
            ru_positions: vec![[0.0; 2]; m],
            ue_positions: vec![[0.0; 2]; k],
            l_per_ru,
            n_per_ue,
            rho_tx,
            rho_rx,
            beta: beta.iter().flatten().copied().collect(),
            unit_factor,
        })
    }

    pub fn m_rus(&self) -> usize {
        self.ru_positions.len()
    }

    pub fn k_ues(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn total_antennas(&self) -> usize {
        self.m_rus() * self.l_per_ru
    }

    pub fn ru_of(&self, antenna: usize) -> usize {
        antenna / self.l_per_ru
    }

    pub fn beta(&self, m: usize, k: usize) -> f64 {
        self.beta[m * self.k_ues() + k]
    }

    pub fn beta_column(&self, k: usize) -> Vec<f64> {
        (0..self.m_rus()).map(|m| self.beta(m, k)).collect()
    }

    pub fn beta_rows(&self) -> Vec<Vec<f64>> {
        self.beta.chunks(self.k_ues().max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn set_beta(&mut self, m: usize, k: usize, value: f64) {
        let kk = self.k_ues();
        self.beta[m * kk + k] = value;
    }

    /// Full covariance of link `(m, k)`.
    pub fn corr_block(&self, m: usize, k: usize) -> DMatrix<f64> {
        build_correlation(self.beta(m, k), self.l_per_ru, self.n_per_ue, self.rho_tx, self.rho_rx)
            .expect("validated at construction")
    }

    /// Covariance of the coefficients from the listed global antennas to all
    /// `N` antennas of UE `k`, indexed `i * N + n`.
    pub fn user_covariance(&self, k: usize, antennas: &[usize]) -> DMatrix<f64> {
        let n = self.n_per_ue;
        DMatrix::from_fn(antennas.len() * n, antennas.len() * n, |r, c| {
            let (ai, ni) = (antennas[r / n], r % n);
            let (aj, nj) = (antennas[c / n], c % n);
            let m = self.ru_of(ai);
            if m != self.ru_of(aj) {
                return 0.0;
            }
            let li = ai % self.l_per_ru;
            let lj = aj % self.l_per_ru;
            self.beta(m, k)
                * self.rho_tx.powi(li.abs_diff(lj) as i32)
                * self.rho_rx.powi(ni.abs_diff(nj) as i32)
        })
    }

    /// Export positions as CSV (`kind,index,x_m,y_m`).
    pub fn write_positions_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["kind", "index", "x_m", "y_m"])?;
        for (kind, list) in [("ru", &self.ru_positions), ("ue", &self.ue_positions)] {
            for (i, p) in list.iter().enumerate() {
                w.write_record([kind.to_string(), i.to_string(), p[0].to_string(), p[1].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Export gains and correlation parameters as JSON.
    pub fn write_params_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let params = DeploymentParams {
            l_per_ru: self.l_per_ru,
            n_per_ue: self.n_per_ue,
            rho_tx: self.rho_tx,
            rho_rx: self.rho_rx,
            beta: self.beta_rows(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&params)?)?;
        Ok(())
    }

    pub fn read(positions_csv: impl AsRef<Path>, params_json: impl AsRef<Path>) -> Result<Self> {
        let params: DeploymentParams = serde_json::from_str(&std::fs::read_to_string(params_json)?)?;
        let mut dep = Deployment::from_gains(&params.beta, params.l_per_ru, params.n_per_ue, params.rho_tx, params.rho_rx)?;
        let mut r = csv::Reader::from_path(positions_csv)?;
        for rec in r.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).ok_or_else(|| Error::Parse("short position row".into()));
            let idx: usize = field(1)?.parse().map_err(|_| Error::Parse("bad index".into()))?;
            let x: f64 = field(2)?.parse().map_err(|_| Error::Parse("bad x".into()))?;
            let y: f64 = field(3)?.parse().map_err(|_| Error::Parse("bad y".into()))?;
            let list = match field(0)? {
                "ru" => &mut dep.ru_positions,
                "ue" => &mut dep.ue_positions,
                other => return Err(Error::Parse(format!("unknown kind `{other}`"))),
            };
            *list
                .get_mut(idx)
                .ok_or_else(|| Error::Parse(format!("position index {idx} out of range")))? = [x, y];
        }
        Ok(dep)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DeploymentParams {
    l_per_ru: usize,
    n_per_ue: usize,
    rho_tx: f64,
    rho_rx: f64,
    beta: Vec<Vec<f64>>,
}

/// Draws RU and UE positions from their grids and the resulting gains.
pub fn place_on_grids<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<Deployment> {
    let pick = |grid: &crate::config::Grid, count: usize, rng: &mut R| -> Result<Vec<[f64; 2]>> {
        let capacity = grid.capacity();
        if count > capacity {
            return Err(Error::GridCapacity {
                requested: count,
                capacity,
            });
        }
        Ok(rand::seq::index::sample(rng, capacity, count)
            .into_iter()
            .map(|i| grid.point(i))
            .collect())
    };
    let ru_positions = pick(&config.ru_grid, config.m_rus, rng)?;
    let ue_positions = pick(&config.ue_grid, config.k_ues, rng)?;

    let params = config.pathloss_params();
    let dh = config.ru_height_m - config.ue_height_m;
    let mut beta = vec![vec![0.0; ue_positions.len()]; ru_positions.len()];
    for (m, ru) in ru_positions.iter().enumerate() {
        for (k, ue) in ue_positions.iter().enumerate() {
            let d = ((ru[0] - ue[0]).powi(2) + (ru[1] - ue[1]).powi(2) + dh * dh).sqrt();
            beta[m][k] = pathloss_linear(d, &params, rng)?;
        }
    }
    let mut dep = Deployment::from_gains(&beta, config.l_per_ru, config.n_per_ue, config.rho_tx, config.rho_rx)?;
    dep.ru_positions = ru_positions;
    dep.ue_positions = ue_positions;
    Ok(dep)
}

/// One draw of every small-scale coefficient `h[m, l, k, n]`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    m_rus: usize,
    k_ues: usize,
    l: usize,
    n: usize,
    h: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn h(&self, m: usize, l: usize, k: usize, n: usize) -> Complex64 {
        self.h[((m * self.k_ues + k) * self.l + l) * self.n + n]
    }

    /// Coefficients of link `(m, k)`, indexed `l * N + n`.
    pub fn block(&self, m: usize, k: usize) -> &[Complex64] {
        let size = self.l * self.n;
        let start = (m * self.k_ues + k) * size;
        &self.h[start..start + size]
    }

    /// `N x L` channel matrix from RU `m` to UE `k`.
    pub fn matrix(&self, m: usize, k: usize) -> DMatrix<Complex64> {
        let b = self.block(m, k);
        DMatrix::from_fn(self.n, self.l, |n, l| b[l * self.n + n])
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.m_rus, self.l, self.k_ues, self.n)
    }
}

/// Draws `h = sqrt(beta) * F z` per link, with `F F^T = T ⊗ R`.
pub fn sample_realization<R: Rng + ?Sized>(dep: &Deployment, rng: &mut R) -> ChannelRealization {
    let size = dep.l_per_ru * dep.n_per_ue;
    let (m_rus, k_ues) = (dep.m_rus(), dep.k_ues());
    let mut h = Vec::with_capacity(m_rus * k_ues * size);
    let mut z = vec![Complex64::new(0.0, 0.0); size];
    for m in 0..m_rus {
        for k in 0..k_ues {
            z.iter_mut().for_each(|v| *v = complex_normal(rng));
            let scale = dep.beta(m, k).sqrt();
            for r in 0..size {
                let mut acc = Complex64::new(0.0, 0.0);
                for c in 0..=r {
                    acc += z[c] * dep.unit_factor[(r, c)];
                }
                h.push(acc * scale);
            }
        }
    }
    ChannelRealization {
        m_rus,
        k_ues,
        l: dep.l_per_ru,
        n: dep.n_per_ue,
        h,
    }
}

//! Reference schemes: small cells, single-frequency network and MRT.
//!
//! Effective channels include `sqrt(P_t)`, so rate formulas use them without
//! a further power factor. Expectations over fading (interference power,
//! channel means and covariances) are estimated from the same trials that
//! produce the instantaneous samples.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_realization, ChannelRealization, Deployment};
use crate::config::{RxCsi, Scheme};
use crate::error::{Error, Result};
use crate::montecarlo::{chunked, MeanEstimate};

type CMat = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Smallest set of strongest RUs holding at least 95% of the total gain.
pub fn select_rus_95(beta_col: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..beta_col.len()).collect();
    order.sort_by(|&a, &b| beta_col[b].total_cmp(&beta_col[a]).then(a.cmp(&b)));
    let total: f64 = beta_col.iter().sum();
    // slack absorbs round-off in the running sum
    let target = 0.95 * total * (1.0 - 1e-12);
    let mut acc = 0.0;
    let mut out = Vec::new();
    for m in order {
        out.push(m);
        acc += beta_col[m];
        if acc >= target {
            break;
        }
    }
    out
}

fn best_ru(beta_col: &[f64]) -> usize {
    (0..beta_col.len())
        .fold(None, |acc: Option<usize>, m| match acc {
            Some(b) if beta_col[b] >= beta_col[m] => Some(b),
            _ => Some(m),
        })
        .expect("at least one RU")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    /// One symbol per user sent identically from every serving antenna.
    Single,
    /// MRT precoding `W = H^H`, one stream per receive antenna.
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrtMode {
    P95,
    SingleRu,
}

/// Serving sets and power-control coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ServingMap {
    pub scheme: Scheme,
    pub layer: Layer,
    /// `U_k`, ascending.
    pub serving: Vec<Vec<usize>>,
    /// `V_m`, ascending.
    pub served: Vec<Vec<usize>>,
    eta: Vec<f64>,
    k_ues: usize,
}

impl ServingMap {
    fn build(scheme: Scheme, layer: Layer, m_rus: usize, serving: Vec<Vec<usize>>) -> Self {
        let k_ues = serving.len();
        let mut serving = serving;
        serving.iter_mut().for_each(|s| s.sort_unstable());
        let mut served = vec![Vec::new(); m_rus];
        for (k, us) in serving.iter().enumerate() {
            for &m in us {
                served[m].push(k);
            }
        }
        ServingMap {
            scheme,
            layer,
            serving,
            served,
            eta: vec![0.0; m_rus * k_ues],
            k_ues,
        }
    }

    pub fn eta(&self, m: usize, k: usize) -> f64 {
        self.eta[m * self.k_ues + k]
    }

    fn set_eta(&mut self, m: usize, k: usize, v: f64) {
        self.eta[m * self.k_ues + k] = v;
    }

    pub fn m_rus(&self) -> usize {
        self.served.len()
    }

    pub fn k_ues(&self) -> usize {
        self.k_ues
    }

    /// Per-RU antenna load: `sum_k eta` (single layer) or
    /// `sum_k eta N beta` (MRT, the expected diagonal of `W W^H`).
    pub fn audit(&self, dep: &Deployment) -> PowerAudit {
        let loads: Vec<f64> = (0..self.m_rus())
            .map(|m| {
                (0..self.k_ues)
                    .map(|k| match self.layer {
                        Layer::Single => self.eta(m, k),
                        Layer::Multi => self.eta(m, k) * dep.n_per_ue as f64 * dep.beta(m, k),
                    })
                    .sum()
            })
            .collect();
        let violations = loads
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 1.0 + 1e-12)
            .map(|(m, _)| m)
            .collect();
        PowerAudit { loads, violations }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAudit {
    pub loads: Vec<f64>,
    /// RUs whose load exceeds one.
    pub violations: Vec<usize>,
}

/// Each user served at full power by its strongest RU.
pub fn smallcell_map(dep: &Deployment) -> ServingMap {
    let serving = (0..dep.k_ues()).map(|k| vec![best_ru(&dep.beta_column(k))]).collect();
    let mut map = ServingMap::build(Scheme::SmallCell, Layer::Single, dep.m_rus(), serving);
    for k in 0..dep.k_ues() {
        let m = map.serving[k][0];
        map.set_eta(m, k, 1.0);
    }
    map
}

/// 95% serving sets with power split equally among each RU's users.
pub fn sfn_map(dep: &Deployment) -> ServingMap {
    let serving = (0..dep.k_ues()).map(|k| select_rus_95(&dep.beta_column(k))).collect();
    let mut map = ServingMap::build(Scheme::Sfn, Layer::Single, dep.m_rus(), serving);
    for m in 0..map.m_rus() {
        let share = 1.0 / map.served[m].len().max(1) as f64;
        for k in map.served[m].clone() {
            map.set_eta(m, k, share);
        }
    }
    map
}

pub fn mrt_map(dep: &Deployment, mode: MrtMode) -> ServingMap {
    let (scheme, serving) = match mode {
        MrtMode::P95 => (
            Scheme::Mrt95,
            (0..dep.k_ues()).map(|k| select_rus_95(&dep.beta_column(k))).collect(),
        ),
        MrtMode::SingleRu => (
            Scheme::Mrt1Ru,
            (0..dep.k_ues()).map(|k| vec![best_ru(&dep.beta_column(k))]).collect(),
        ),
    };
    let mut map = ServingMap::build(scheme, Layer::Multi, dep.m_rus(), serving);
    let n = dep.n_per_ue as f64;
    for m in 0..map.m_rus() {
        let load: f64 = map.served[m].iter().map(|&l| n * dep.beta(m, l)).sum();
        for k in map.served[m].clone() {
            map.set_eta(m, k, 1.0 / load);
        }
    }
    map
}

/// Map for a baseline scheme; `None` for the coded scheme.
pub fn serving_map(scheme: Scheme, dep: &Deployment) -> Option<ServingMap> {
    match scheme {
        Scheme::Alamouti => None,
        Scheme::SmallCell => Some(smallcell_map(dep)),
        Scheme::Sfn => Some(sfn_map(dep)),
        Scheme::Mrt95 => Some(mrt_map(dep, MrtMode::P95)),
        Scheme::Mrt1Ru => Some(mrt_map(dep, MrtMode::SingleRu)),
    }
}

/// `D_{k,l}` for every receiving user `k` and transmitted user `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannels {
    k_ues: usize,
    d: Vec<CMat>,
}

impl EffectiveChannels {
    pub fn get(&self, k: usize, l: usize) -> &CMat {
        &self.d[k * self.k_ues + l]
    }
}

fn columns(layer: Layer, n_ant: usize) -> usize {
    match layer {
        Layer::Single => 1,
        Layer::Multi => n_ant,
    }
}

fn check_dims(map: &ServingMap, m_rus: usize, k_ues: usize) -> Result<()> {
    if m_rus != map.m_rus() || k_ues != map.k_ues() {
        return Err(Error::LengthMismatch {
            expected: map.m_rus() * map.k_ues(),
            got: m_rus * k_ues,
        });
    }
    Ok(())
}

/// Writes `D_{k,l}` column-major into `out` (`N x cols`).
fn fill_effective(map: &ServingMap, real: &ChannelRealization, sqrt_pt: f64, k: usize, l: usize, out: &mut [Complex64]) {
    let (_, l_ant, _, n_ant) = real.dims();
    out.fill(ZERO);
    for &m in &map.serving[l] {
        let w = map.eta(m, l).sqrt() * sqrt_pt;
        if w == 0.0 {
            continue;
        }
        let hk = real.block(m, k);
        match map.layer {
            Layer::Single => {
                for n in 0..n_ant {
                    let s: Complex64 = (0..l_ant).map(|a| hk[a * n_ant + n]).sum();
                    out[n] += s * w;
                }
            }
            Layer::Multi => {
                let hl = real.block(m, l);
                for n2 in 0..n_ant {
                    for n in 0..n_ant {
                        let s: Complex64 = (0..l_ant).map(|a| hk[a * n_ant + n] * hl[a * n_ant + n2].conj()).sum();
                        out[n2 * n_ant + n] += s * w;
                    }
                }
            }
        }
    }
}

/// Builds `D_{k,l} = sqrt(P_t) sum_{m in U_l} sqrt(eta_{m,l}) H_{m,k} X`,
/// with `X = 1_L` (single layer) or `X = H_{m,l}^H` (MRT).
pub fn effective_channels(map: &ServingMap, real: &ChannelRealization, p_t: f64) -> Result<EffectiveChannels> {
    let (m_rus, _, k_ues, n_ant) = real.dims();
    check_dims(map, m_rus, k_ues)?;
    let cols = columns(map.layer, n_ant);
    let mut buf = vec![ZERO; n_ant * cols];
    let mut d = Vec::with_capacity(k_ues * k_ues);
    for k in 0..k_ues {
        for l in 0..k_ues {
            fill_effective(map, real, p_t.sqrt(), k, l, &mut buf);
            d.push(CMat::from_column_slice(n_ant, cols, &buf));
        }
    }
    Ok(EffectiveChannels { k_ues, d })
}

/// `log2 det(I + D^H Psi^{-1} D)` for Hermitian positive definite `Psi`.
pub fn log_det_se(d: &CMat, psi: &CMat) -> Result<f64> {
    let chol = psi.clone().cholesky().ok_or(Error::Factorization)?;
    let a = chol.l().solve_lower_triangular(d).ok_or(Error::Factorization)?;
    let g = CMat::identity(d.ncols(), d.ncols()) + a.adjoint() * a;
    let det = g.cholesky().ok_or(Error::Factorization)?.determinant();
    Ok(det.log2())
}

/// Rate with only the mean channel known at the receiver:
/// `log2 det(I + Dbar^H Psi^{-1} Dbar)` with
/// `Psi = E_other + E[D D^H] - Dbar Dbar^H + sigma^2 I`.
pub fn statistical_se(mean: &CMat, second_other: &CMat, second_self: &CMat, noise_var: f64) -> Result<f64> {
    let n = mean.nrows();
    let psi = second_other + second_self - mean * mean.adjoint() + CMat::identity(n, n) * Complex64::from(noise_var);
    log_det_se(mean, &psi)
}

/// Per-user outcome of a baseline evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub ergodic: Vec<MeanEstimate>,
    /// Single-layer SINR draws per user, for outage evaluation.
    pub sinr: Option<Vec<Vec<f64>>>,
}

/// One scheme evaluated over a set of draws: perfect receiver CSI, plus the
/// mean-only receiver for precoded schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineEval {
    pub perfect: BaselineResult,
    pub statistical: Option<Vec<MeanEstimate>>,
}

impl BaselineEval {
    pub fn for_csi(&self, csi: RxCsi) -> Result<BaselineResult> {
        match csi {
            RxCsi::Perfect => Ok(self.perfect.clone()),
            RxCsi::Statistical => Ok(BaselineResult {
                ergodic: self.statistical.clone().ok_or(Error::UnsupportedCsi)?,
                sinr: None,
            }),
        }
    }
}

/// Per-user running sums, matrices stored column-major.
struct Acc {
    samples: Vec<Vec<Complex64>>,
    other: Vec<Vec<Complex64>>,
    own: Vec<Vec<Complex64>>,
    mean: Vec<Vec<Complex64>>,
}

impl Acc {
    fn new(k_ues: usize, n: usize, cols: usize, capacity: usize) -> Self {
        Acc {
            samples: vec![Vec::with_capacity(capacity * n * cols); k_ues],
            other: vec![vec![ZERO; n * n]; k_ues],
            own: vec![vec![ZERO; n * n]; k_ues],
            mean: vec![vec![ZERO; n * cols]; k_ues],
        }
    }

    fn merge(&mut self, o: Acc) {
        let add = |a: &mut Vec<Vec<Complex64>>, b: Vec<Vec<Complex64>>| {
            for (x, y) in a.iter_mut().zip(b) {
                x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
            }
        };
        add(&mut self.other, o.other);
        add(&mut self.own, o.own);
        add(&mut self.mean, o.mean);
        for (dst, src) in self.samples.iter_mut().zip(o.samples) {
            dst.extend(src);
        }
    }
}

/// `acc += d d^H` for column-major `d` of shape `n x cols`.
fn add_outer(acc: &mut [Complex64], d: &[Complex64], n: usize, cols: usize) {
    for j in 0..n {
        for i in 0..n {
            let s: Complex64 = (0..cols).map(|c| d[c * n + i] * d[c * n + j].conj()).sum();
            acc[j * n + i] += s;
        }
    }
}

/// Evaluates several schemes over one shared set of channel draws.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_baselines(
    maps: &[ServingMap],
    dep: &Deployment,
    p_t: f64,
    noise_var: f64,
    n_trial: usize,
    seed: u64,
    labels: &[u64],
) -> Result<Vec<BaselineEval>> {
    let (k_ues, n) = (dep.k_ues(), dep.n_per_ue);
    for map in maps {
        check_dims(map, dep.m_rus(), k_ues)?;
    }
    let sqrt_pt = p_t.sqrt();
    let chunks = chunked(n_trial, seed, labels, |rng, count| {
        let mut accs: Vec<Acc> = maps
            .iter()
            .map(|m| Acc::new(k_ues, n, columns(m.layer, n), count))
            .collect();
        let mut buf = vec![ZERO; n * n];
        for _ in 0..count {
            let real = sample_realization(dep, rng);
            for (map, acc) in maps.iter().zip(accs.iter_mut()) {
                let cols = columns(map.layer, n);
                let d = &mut buf[..n * cols];
                for k in 0..k_ues {
                    for l in 0..k_ues {
                        fill_effective(map, &real, sqrt_pt, k, l, d);
                        if l == k {
                            add_outer(&mut acc.own[k], d, n, cols);
                            acc.mean[k].iter_mut().zip(d.iter()).for_each(|(p, q)| *p += q);
                            acc.samples[k].extend_from_slice(d);
                        } else {
                            add_outer(&mut acc.other[k], d, n, cols);
                        }
                    }
                }
            }
        }
        accs
    });
    let mut totals: Vec<Acc> = maps.iter().map(|m| Acc::new(k_ues, n, columns(m.layer, n), 0)).collect();
    for chunk in chunks {
        for (t, c) in totals.iter_mut().zip(chunk) {
            t.merge(c);
        }
    }
    let inv = Complex64::from(1.0 / n_trial as f64);
    let eye = CMat::identity(n, n) * Complex64::from(noise_var);
    maps.iter()
        .zip(totals)
        .map(|(map, total)| {
            let cols = columns(map.layer, n);
            let mut ergodic = Vec::with_capacity(k_ues);
            let mut sinr = Vec::with_capacity(k_ues);
            let mut statistical = Vec::with_capacity(k_ues);
            for k in 0..k_ues {
                let other = CMat::from_column_slice(n, n, &total.other[k]) * inv;
                let draws = total.samples[k].chunks_exact(n * cols);
                match map.layer {
                    Layer::Single => {
                        let denom = other.trace().re + noise_var;
                        let s: Vec<f64> = draws.map(|d| d.iter().map(Complex64::norm_sqr).sum::<f64>() / denom).collect();
                        ergodic.push(MeanEstimate::from_values(s.iter().map(|x| x.ln_1p() * std::f64::consts::LOG2_E)));
                        sinr.push(s);
                    }
                    Layer::Multi => {
                        let psi = &other + &eye;
                        let values = if n == 1 {
                            let p = psi[(0, 0)].re;
                            draws.map(|d| Ok((d[0].norm_sqr() / p).ln_1p() * std::f64::consts::LOG2_E)).collect::<Result<Vec<f64>>>()?
                        } else {
                            draws
                                .map(|d| log_det_se(&CMat::from_column_slice(n, n, d), &psi))
                                .collect::<Result<Vec<f64>>>()?
                        };
                        ergodic.push(MeanEstimate::from_values(values.into_iter()));
                        let mean = CMat::from_column_slice(n, n, &total.mean[k]) * inv;
                        let own = CMat::from_column_slice(n, n, &total.own[k]) * inv;
                        statistical.push(MeanEstimate {
                            mean: statistical_se(&mean, &other, &own, noise_var)?,
                            std_err: 0.0,
                        });
                    }
                }
            }
            let single = map.layer == Layer::Single;
            Ok(BaselineEval {
                perfect: BaselineResult {
                    ergodic,
                    sinr: single.then_some(sinr),
                },
                statistical: (!single).then_some(statistical),
            })
        })
        .collect()
}

/// Ergodic rates of one baseline; outage samples for single-layer schemes.
#[allow(clippy::too_many_arguments)]
pub fn baseline_se(
    map: &ServingMap,
    dep: &Deployment,
    csi: RxCsi,
    p_t: f64,
    noise_var: f64,
    n_trial: usize,
    seed: u64,
    labels: &[u64],
) -> Result<BaselineResult> {
    if csi == RxCsi::Statistical && map.layer != Layer::Multi {
        return Err(Error::UnsupportedCsi);
    }
    evaluate_baselines(std::slice::from_ref(map), dep, p_t, noise_var, n_trial, seed, labels)?
        .remove(0)
        .for_csi(csi)
}

/// Empirical per-antenna transmit load `sum_k eta [W W^H]_{ii}` (MRT) or
/// `sum_k eta` (single layer), maximised over each RU's antennas.
pub fn empirical_antenna_load(map: &ServingMap, dep: &Deployment, n_trial: usize, seed: u64) -> Vec<f64> {
    let (m_rus, l_ant, n_ant) = (dep.m_rus(), dep.l_per_ru, dep.n_per_ue);
    let chunks = chunked(n_trial, seed, &[0xA0D1], |rng, count| {
        let mut sums = vec![0.0; m_rus * l_ant];
        for _ in 0..count {
            let real = sample_realization(dep, rng);
            for m in 0..m_rus {
                for &k in &map.served[m] {
                    let eta = map.eta(m, k);
                    let h = real.block(m, k);
                    for a in 0..l_ant {
                        let w = match map.layer {
                            Layer::Single => 1.0,
                            Layer::Multi => (0..n_ant).map(|n| h[a * n_ant + n].norm_sqr()).sum(),
                        };
                        sums[m * l_ant + a] += eta * w;
                    }
                }
            }
        }
        sums
    });
    let mut sums = vec![0.0; m_rus * l_ant];
    for c in chunks {
        sums.iter_mut().zip(c).for_each(|(s, v)| *s += v);
    }
    (0..m_rus)
        .map(|m| {
            (0..l_ant)
                .map(|a| sums[m * l_ant + a] / n_trial as f64)
                .fold(0.0, f64::max)
        })
        .collect()
}

//! Trial-based SINR evaluation for clustered users.
//!
//! Trials run in fixed-size chunks, each drawing from its own sub-stream, so
//! the samples are bit-identical for any number of worker threads.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::Deployment;
use crate::clustering::ClusterAssignment;
use crate::codes::get_code;
use crate::error::{Error, Result};
use crate::rates::user_interference;
use crate::rng::{complex_normal, stream, SimRng};

/// Trials per sub-stream.
pub const CHUNK: usize = 1024;

/// Runs `per_chunk(rng, count)` over consecutive chunks of `n_trial` trials in
/// parallel and returns the chunk results in order.
pub fn chunked<T, F>(n_trial: usize, seed: u64, labels: &[u64], per_chunk: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SimRng, usize) -> T + Sync,
{
    let n_chunks = n_trial.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut path = labels.to_vec();
            path.push(c as u64);
            let mut rng = stream(seed, &path);
            per_chunk(&mut rng, CHUNK.min(n_trial - c * CHUNK))
        })
        .collect()
}

/// SINR draws of one user, one array per symbol of a code block.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSamples {
    pub user: usize,
    /// Code blocks per accounting window.
    pub repeats: usize,
    pub symbols: Vec<Vec<f64>>,
}

impl UserSamples {
    pub fn n_trial(&self) -> usize {
        self.symbols.first().map_or(0, Vec::len)
    }

    /// `|S_k|`.
    pub fn symbols_per_frame(&self) -> usize {
        self.repeats * self.symbols.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinrSamples {
    pub t0: usize,
    pub users: Vec<UserSamples>,
}

/// Lower Cholesky factor of a covariance; diagonal jitter is not applied.
fn cholesky(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(cov.clone().cholesky().ok_or(Error::Factorization)?.l())
}

/// Draws `n_trial` channels per clustered user and evaluates the per-symbol
/// SINR `sum_n |h_{k,n,i}|^2 P_t / (I_k P_t + sigma^2)`, with each symbol's
/// channel vector built from its code column.
pub fn sinr_realizations(
    assignment: &ClusterAssignment,
    dep: &Deployment,
    p_t: f64,
    noise_var: f64,
    n_trial: usize,
    seed: u64,
    labels: &[u64],
) -> Result<SinrSamples> {
    let n = dep.n_per_ue;
    let mut users = Vec::with_capacity(dep.k_ues());
    for k in 0..dep.k_ues() {
        let (c, pos) = assignment
            .cluster_of_user(k)
            .ok_or_else(|| Error::Config(format!("user {k} is not in any cluster")))?;
        let cl = &assignment.clusters[c];
        let spec = get_code(cl.code());
        let syms = cl.symbols_of(pos);
        let a = cl.antennas.len();
        let chol = cholesky(&dep.user_covariance(k, &cl.antennas))?;
        let denom = user_interference(k, assignment, dep) * n as f64 * p_t + noise_var;
        let gain = p_t / denom;

        let mut path = labels.to_vec();
        path.push(k as u64);
        let chunks = chunked(n_trial, seed, &path, |rng, count| {
            let d = a * n;
            let mut out = vec![Vec::with_capacity(count); syms.len()];
            let mut z = vec![Complex64::new(0.0, 0.0); d];
            let mut gains = vec![Complex64::new(0.0, 0.0); a];
            for _ in 0..count {
                z.iter_mut().for_each(|v| *v = complex_normal(rng));
                // x = L z, indexed antenna * N + n
                let x: Vec<Complex64> = (0..d)
                    .map(|r| (0..=r).map(|c| z[c] * chol[(r, c)]).sum())
                    .collect();
                for (slot, &p) in out.iter_mut().zip(&syms) {
                    let mut power = 0.0;
                    for rx in 0..n {
                        for (i, g) in gains.iter_mut().enumerate() {
                            *g = x[i * n + rx];
                        }
                        let v = spec.symbol_channel_vector(p, &gains).expect("gain length matches code");
                        power += v.iter().map(Complex64::norm_sqr).sum::<f64>();
                    }
                    slot.push(power * gain);
                }
            }
            out
        });
        let mut symbols = vec![Vec::with_capacity(n_trial); syms.len()];
        for chunk in chunks {
            for (dst, src) in symbols.iter_mut().zip(chunk) {
                dst.extend(src);
            }
        }
        users.push(UserSamples {
            user: k,
            repeats: cl.repeats(),
            symbols,
        });
    }
    Ok(SinrSamples {
        t0: assignment.t0(),
        users,
    })
}

/// The `k`-th order statistic with `k = max(1, floor(p_out * n))`.
pub fn outage_threshold(samples: &[f64], p_out: f64) -> Result<f64> {
    if !(p_out > 0.0 && p_out < 1.0) {
        return Err(Error::Domain {
            function: "p_out",
            value: p_out,
        });
    }
    let reliable = samples.len() as f64 * p_out;
    if reliable < 10.0 {
        return Err(Error::OutageUnreliable(reliable));
    }
    let rank = ((p_out * samples.len() as f64).floor() as usize).max(1);
    let mut v = samples.to_vec();
    let (_, kth, _) = v.select_nth_unstable_by(rank - 1, |a, b| a.total_cmp(b));
    Ok(*kth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageUser {
    pub user: usize,
    pub sinr_min: Vec<f64>,
    pub se_outage: f64,
    pub p_out: f64,
}

/// `(1 - p_out) / T0 * sum over S_k of log2(1 + threshold)`.
pub fn outage_se(samples: &UserSamples, p_out: f64, t0: usize) -> Result<OutageUser> {
    let sinr_min = samples
        .symbols
        .iter()
        .map(|s| outage_threshold(s, p_out))
        .collect::<Result<Vec<f64>>>()?;
    let sum: f64 = sinr_min.iter().map(|s| s.log2_1p()).sum();
    Ok(OutageUser {
        user: samples.user,
        se_outage: (1.0 - p_out) * samples.repeats as f64 * sum / t0 as f64,
        sinr_min,
        p_out,
    })
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() * std::f64::consts::LOG2_E
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
}

impl MeanEstimate {
    pub fn from_values(values: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
        for v in values {
            n += 1;
            let delta = v - mean;
            mean += delta / n as f64;
            m2 += delta * (v - mean);
        }
        if n == 0 {
            return MeanEstimate { mean: 0.0, std_err: 0.0 };
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        MeanEstimate {
            mean,
            std_err: (var / n as f64).sqrt(),
        }
    }
}

/// `(1/T0) sum over S_k of mean log2(1 + SINR)`; zero without samples.
pub fn mc_mean_log(samples: &UserSamples, t0: usize) -> MeanEstimate {
    let w = samples.repeats as f64 / t0 as f64;
    let per_trial = (0..samples.n_trial()).map(|t| w * samples.symbols.iter().map(|s| s[t].log2_1p()).sum::<f64>());
    MeanEstimate::from_values(per_trial)
}

#[derive(Serialize, Deserialize)]
struct DumpHeader {
    dtype: String,
    t0: usize,
    n_trial: usize,
    users: Vec<DumpUser>,
}

#[derive(Serialize, Deserialize)]
struct DumpUser {
    user: usize,
    repeats: usize,
    symbols: usize,
}

/// Writes `<stem>.bin` (little-endian f64, user-major then symbol-major) and a
/// `<stem>.json` header describing the layout.
pub fn write_sample_dump(samples: &SinrSamples, stem: impl AsRef<Path>) -> Result<()> {
    let stem = stem.as_ref();
    let header = DumpHeader {
        dtype: "f64le".into(),
        t0: samples.t0,
        n_trial: samples.users.first().map_or(0, UserSamples::n_trial),
        users: samples
            .users
            .iter()
            .map(|u| DumpUser {
                user: u.user,
                repeats: u.repeats,
                symbols: u.symbols.len(),
            })
            .collect(),
    };
    std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&header)?)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(stem.with_extension("bin"))?);
    for u in &samples.users {
        for s in &u.symbols {
            for v in s {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_sample_dump(stem: impl AsRef<Path>) -> Result<SinrSamples> {
    let stem = stem.as_ref();
    let header: DumpHeader = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
    if header.dtype != "f64le" {
        return Err(Error::Parse(format!("unsupported dtype {}", header.dtype)));
    }
    let bytes = std::fs::read(stem.with_extension("bin"))?;
    let total: usize = header.users.iter().map(|u| u.symbols).sum::<usize>() * header.n_trial;
    if bytes.len() != total * 8 {
        return Err(Error::LengthMismatch {
            expected: total * 8,
            got: bytes.len(),
        });
    }
    let mut values = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()));
    let users = header
        .users
        .iter()
        .map(|u| UserSamples {
            user: u.user,
            repeats: u.repeats,
            symbols: (0..u.symbols).map(|_| values.by_ref().take(header.n_trial).collect()).collect(),
        })
        .collect();
    Ok(SinrSamples { t0: header.t0, users })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::Cluster;

    fn constant(c: f64, repeats: usize, symbols: usize, n: usize) -> UserSamples {
        UserSamples {
            user: 0,
            repeats,
            symbols: vec![vec![c; n]; symbols],
        }
    }

    #[test]
    fn constant_samples() {
        let s = constant(3.0, 4, 2, 2000);
        let o = outage_se(&s, 0.01, 8).unwrap();
        assert_eq!(o.sinr_min, vec![3.0, 3.0]);
        assert!((o.se_outage - 0.99 * 8.0 / 8.0 * 2.0).abs() < 1e-12);
        let m = mc_mean_log(&s, 8);
        assert!((m.mean - 2.0 * 4.0 / 8.0 * 2.0).abs() < 1e-12);
        assert_eq!(m.std_err, 0.0);
    }

    #[test]
    fn empty_and_unreliable() {
        assert_eq!(mc_mean_log(&constant(1.0, 1, 1, 0), 8).mean, 0.0);
        assert!(matches!(outage_threshold(&[1.0; 999], 0.01), Err(Error::OutageUnreliable(_))));
        assert!(outage_threshold(&[1.0; 1000], 0.01).is_ok());
        assert!(outage_threshold(&[1.0; 1000], 1.0).is_err());
    }

    #[test]
    fn order_statistic_rank() {
        let v: Vec<f64> = (1..=2000).rev().map(f64::from).collect();
        assert_eq!(outage_threshold(&v, 0.01).unwrap(), 20.0);
        assert_eq!(outage_threshold(&v, 0.0123).unwrap(), 24.0);
    }

    #[test]
    fn outage_vanishes_as_p_out_grows() {
        let s = constant(5.0, 1, 1, 100_000);
        assert!(outage_se(&s, 0.9999, 1).unwrap().se_outage < 1e-3);
    }

    #[test]
    fn chunks_are_thread_independent() {
        let draw = |rng: &mut SimRng, n: usize| (0..n).map(|_| complex_normal(rng).re).collect::<Vec<_>>();
        let a = chunked(5000, 9, &[1], draw);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| chunked(5000, 9, &[1], draw));
        assert_eq!(a, b);
        assert_eq!(a.iter().map(Vec::len).sum::<usize>(), 5000);
    }

    #[test]
    fn symbols_share_samples_and_scale_with_power() {
        let dep = Deployment::from_gains(&[vec![1.0], vec![0.5], vec![0.3]], 1, 2, 0.5, 0.5).unwrap();
        let a = ClusterAssignment {
            clusters: vec![Cluster::new(vec![0, 1, 2], vec![0])],
            unused_antennas: Default::default(),
        };
        let s1 = sinr_realizations(&a, &dep, 1.0, 1.0, 2000, 4, &[]).unwrap();
        let u = &s1.users[0];
        assert_eq!(u.symbols.len(), 3);
        assert_eq!(u.symbols_per_frame(), 6);
        for s in &u.symbols[1..] {
            for (x, y) in s.iter().zip(&u.symbols[0]) {
                assert!((x - y).abs() <= 1e-12 * y);
            }
        }
        let s2 = sinr_realizations(&a, &dep, 2.0, 1.0, 2000, 4, &[]).unwrap();
        for (x, y) in s2.users[0].symbols[0].iter().zip(&u.symbols[0]) {
            assert!((x - 2.0 * y).abs() <= 1e-12 * y);
        }
    }

    #[test]
    fn dump_round_trip() {
        let s = SinrSamples {
            t0: 8,
            users: vec![constant(1.5, 2, 2, 3), constant(0.25, 8, 1, 3)],
        };
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("samples");
        write_sample_dump(&s, &stem).unwrap();
        assert_eq!(read_sample_dump(&stem).unwrap(), s);
    }
}

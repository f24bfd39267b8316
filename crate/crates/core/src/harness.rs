//! Experiment orchestration: per-drop evaluation of every configured method,
//! percentile statistics and report files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{evaluate_baselines, serving_map, PowerAudit};
use crate::channel::{place_on_grids, Deployment};
use crate::clustering::{cluster_users, ClusterAssignment, ClusteringTrace};
use crate::config::{Method, RxCsi, Scheme, SimConfig};
use crate::error::{Error, Result};
use crate::montecarlo::{outage_se, outage_threshold, sinr_realizations, SinrSamples};
use crate::rates::{Evaluation, RateEngine};
use crate::rng::{purpose, stream};

/// Per-user outcome of one method in one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub drop: usize,
    pub method: Method,
    pub user: usize,
    pub se_ergodic: f64,
    pub se_outage: Option<f64>,
    /// Smallest per-symbol outage threshold (linear).
    pub sinr_min: Option<f64>,
    pub cluster_type: Option<u8>,
    /// Ergodic rate came from the quadrature fallback.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropReport {
    pub drop: usize,
    pub rows: Vec<RateRow>,
    pub assignment: Option<ClusterAssignment>,
    pub trace: Option<ClusteringTrace>,
    pub audits: Vec<(Scheme, PowerAudit)>,
}

impl DropReport {
    /// Users whose outage rate exceeds their ergodic rate.
    pub fn ordering_violations(&self) -> Vec<(Method, usize)> {
        self.rows
            .iter()
            .filter(|r| r.se_outage.is_some_and(|o| o > r.se_ergodic))
            .map(|r| (r.method, r.user))
            .collect()
    }
}

/// Places RUs and users for one drop.
pub fn deployment_for_drop(config: &SimConfig, drop: usize) -> Result<Deployment> {
    let mut rng = stream(config.seed, &[purpose::DEPLOY, drop as u64]);
    place_on_grids(config, &mut rng)
}

/// Clustered scheme: closed-form ergodic rates and Monte-Carlo outage rates.
fn coded_rows(config: &SimConfig, dep: &Deployment, drop: usize, report: &mut DropReport) -> Result<()> {
    let engine = RateEngine::from_config(config);
    let (assignment, trace) = cluster_users(dep, &engine)?;
    let rates = engine.ergodic_se_all(&assignment, dep)?;
    let samples = sinr_realizations(
        &assignment,
        dep,
        config.p_t_watts,
        config.noise_variance(),
        config.n_trial,
        config.seed,
        &[purpose::ALAMOUTI_MC, drop as u64],
    )?;
    for (k, rate) in rates.iter().enumerate() {
        let (c, _) = assignment.cluster_of_user(k).expect("every user clustered");
        let out = outage_se(&samples.users[k], config.p_out, samples.t0)?;
        report.rows.push(RateRow {
            drop,
            method: Method::perfect(Scheme::Alamouti),
            user: k,
            se_ergodic: rate.se,
            se_outage: Some(out.se_outage),
            sinr_min: out.sinr_min.iter().cloned().reduce(f64::min),
            cluster_type: assignment.clusters[c].type_id(),
            fallback: rate.evaluation != Evaluation::ClosedForm,
        });
    }
    report.assignment = Some(assignment);
    report.trace = Some(trace);
    Ok(())
}

/// Runs one drop: deployment, clustering and every configured method.
pub fn run_drop(config: &SimConfig, drop: usize) -> Result<DropReport> {
    let dep = deployment_for_drop(config, drop)?;
    let mut report = DropReport {
        drop,
        rows: Vec::new(),
        assignment: None,
        trace: None,
        audits: Vec::new(),
    };
    let mut schemes: Vec<Scheme> = config.methods.iter().map(|m| m.scheme).collect();
    schemes.sort();
    schemes.dedup();

    if schemes.contains(&Scheme::Alamouti) {
        coded_rows(config, &dep, drop, &mut report)?;
    }
    let maps: Vec<_> = schemes.iter().filter_map(|&s| serving_map(s, &dep)).collect();
    if maps.is_empty() {
        return Ok(report);
    }
    let evals = evaluate_baselines(
        &maps,
        &dep,
        config.p_t_watts,
        config.noise_variance(),
        config.n_trial,
        config.seed,
        &[purpose::BASELINE_MC, drop as u64],
    )?;
    for (map, eval) in maps.iter().zip(&evals) {
        report.audits.push((map.scheme, map.audit(&dep)));
        for method in config.methods.iter().filter(|m| m.scheme == map.scheme) {
            let result = eval.for_csi(method.csi)?;
            for (k, est) in result.ergodic.iter().enumerate() {
                let threshold = match (&result.sinr, method.csi) {
                    (Some(s), RxCsi::Perfect) => Some(outage_threshold(&s[k], config.p_out)?),
                    _ => None,
                };
                report.rows.push(RateRow {
                    drop,
                    method: *method,
                    user: k,
                    se_ergodic: est.mean,
                    se_outage: threshold.map(|t| (1.0 - config.p_out) * t.ln_1p() * std::f64::consts::LOG2_E),
                    sinr_min: threshold,
                    cluster_type: None,
                    fallback: false,
                });
            }
        }
    }
    // stable order: configured method order, then user
    let rank = |m: &Method| config.methods.iter().position(|x| x == m).unwrap_or(usize::MAX);
    report.rows.sort_by_key(|r| (rank(&r.method), r.user));
    Ok(report)
}

/// Samples of the clustered scheme for one drop, for debugging dumps.
pub fn coded_samples(config: &SimConfig, drop: usize) -> Result<SinrSamples> {
    let dep = deployment_for_drop(config, drop)?;
    let engine = RateEngine::from_config(config);
    let (assignment, _) = cluster_users(&dep, &engine)?;
    sinr_realizations(
        &assignment,
        &dep,
        config.p_t_watts,
        config.noise_variance(),
        config.n_trial,
        config.seed,
        &[purpose::ALAMOUTI_MC, drop as u64],
    )
}

/// Runs every drop (in parallel) and returns reports in drop order.
pub fn run(config: &SimConfig) -> Result<Vec<DropReport>> {
    config.validate()?;
    (0..config.n_drops).into_par_iter().map(|d| run_drop(config, d)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ergodic,
    Outage,
    ClusterType,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Ergodic => "ergodic",
            Metric::Outage => "outage",
            Metric::ClusterType => "cluster_type",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ergodic" => Ok(Metric::Ergodic),
            "outage" => Ok(Metric::Outage),
            "cluster_type" => Ok(Metric::ClusterType),
            other => Err(Error::Parse(format!("unknown metric `{other}`"))),
        }
    }
}

/// One line of the long-format report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub method: String,
    pub metric: Metric,
    pub user: usize,
    pub drop: usize,
    pub value: f64,
}

/// Flattens rows into `(method, metric, user, drop, value)` records.
pub fn records(rows: &[RateRow]) -> Vec<Record> {
    let mut out = Vec::new();
    for r in rows {
        let rec = |metric, value| Record {
            method: r.method.to_string(),
            metric,
            user: r.user,
            drop: r.drop,
            value,
        };
        out.push(rec(Metric::Ergodic, r.se_ergodic));
        if let Some(v) = r.se_outage {
            out.push(rec(Metric::Outage, v));
        }
        if let Some(t) = r.cluster_type {
            out.push(rec(Metric::ClusterType, f64::from(t)));
        }
    }
    out
}

/// Percentile by linear interpolation at 1-based position `p (n + 1)`,
/// clamped to the extreme order statistics.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = p * (n as f64 + 1.0);
    if h <= 1.0 {
        return sorted[0];
    }
    if h >= n as f64 {
        return sorted[n - 1];
    }
    let lo = h.floor() as usize;
    sorted[lo - 1] + (h - lo as f64) * (sorted[lo] - sorted[lo - 1])
}

pub const MIN_SAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    pub metric: Metric,
    pub n: usize,
    pub p5: f64,
    pub median: f64,
    /// `(value, cumulative probability i/n)`.
    #[serde(skip)]
    pub cdf: Vec<(f64, f64)>,
}

/// Pools per-user values across drops for each (method, metric) and computes
/// the 5th percentile, median and empirical CDF.
pub fn aggregate(records: &[Record]) -> Result<Vec<Summary>> {
    let mut groups: BTreeMap<(String, Metric), Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.metric != Metric::ClusterType) {
        groups.entry((r.method.clone(), r.metric)).or_default().push(r.value);
    }
    groups
        .into_iter()
        .map(|((method, metric), mut v)| {
            if v.len() < MIN_SAMPLES {
                return Err(Error::InsufficientSamples {
                    needed: MIN_SAMPLES,
                    got: v.len(),
                });
            }
            v.sort_by(f64::total_cmp);
            let n = v.len();
            Ok(Summary {
                method,
                metric,
                n,
                p5: percentile(&v, 0.05),
                median: percentile(&v, 0.5),
                cdf: v.iter().enumerate().map(|(i, &x)| (x, (i + 1) as f64 / n as f64)).collect(),
            })
        })
        .collect()
}

pub fn find_summary<'a>(summaries: &'a [Summary], method: &str, metric: Metric) -> Option<&'a Summary> {
    summaries.iter().find(|s| s.method == method && s.metric == metric)
}

pub const RATES_FILE: &str = "rates.csv";
pub const CDF_FILE: &str = "cdf.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringStats {
    pub drop: usize,
    pub merge_trials: usize,
    pub add_trials: usize,
    pub clusters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub config: SimConfig,
    pub percentiles: Vec<Summary>,
    /// Users whose ergodic rate used the quadrature fallback.
    pub fallback_users: usize,
    /// `(drop, method, RU)` with a per-antenna power constraint exceeded.
    pub power_violations: Vec<(usize, String, usize)>,
    /// `(drop, method, user)` with outage rate above ergodic rate.
    pub ordering_violations: Vec<(usize, String, usize)>,
    pub clustering: Vec<ClusteringStats>,
}

pub fn summarize(config: &SimConfig, reports: &[DropReport]) -> Result<RunSummary> {
    let rows: Vec<RateRow> = reports.iter().flat_map(|r| r.rows.clone()).collect();
    let summaries = if rows.is_empty() { Vec::new() } else { aggregate(&records(&rows))? };
    Ok(RunSummary {
        seed: config.seed,
        config: config.clone(),
        percentiles: summaries,
        fallback_users: rows.iter().filter(|r| r.fallback).count(),
        power_violations: reports
            .iter()
            .flat_map(|r| {
                r.audits
                    .iter()
                    .flat_map(move |(s, a)| a.violations.iter().map(move |&m| (r.drop, s.name().to_string(), m)))
            })
            .collect(),
        ordering_violations: reports
            .iter()
            .flat_map(|r| r.ordering_violations().into_iter().map(move |(m, k)| (r.drop, m.to_string(), k)))
            .collect(),
        clustering: reports
            .iter()
            .filter_map(|r| {
                let t = r.trace.as_ref()?;
                Some(ClusteringStats {
                    drop: r.drop,
                    merge_trials: t.merge_trials,
                    add_trials: t.add_trials,
                    clusters: r.assignment.as_ref().map_or(0, |a| a.clusters.len()),
                })
            })
            .collect(),
    })
}

/// Writes the long-format CSV.
pub fn write_records(path: impl AsRef<Path>, records: &[Record]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "metric", "user", "drop", "value"])?;
    for r in records {
        w.write_record([
            r.method.clone(),
            r.metric.to_string(),
            r.user.to_string(),
            r.drop.to_string(),
            r.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<Record>> {
    let mut rd = csv::Reader::from_path(path)?;
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["method", "metric", "user", "drop", "value"] {
        return Err(Error::Parse(format!("unexpected header {headers:?}")));
    }
    let parse_err = |what: &str, v: &str| Error::Parse(format!("bad {what} `{v}`"));
    rd.records()
        .map(|rec| {
            let rec = rec?;
            Ok(Record {
                method: rec[0].to_string(),
                metric: rec[1].parse()?,
                user: rec[2].parse().map_err(|_| parse_err("user", &rec[2]))?,
                drop: rec[3].parse().map_err(|_| parse_err("drop", &rec[3]))?,
                value: rec[4].parse().map_err(|_| parse_err("value", &rec[4]))?,
            })
        })
        .collect()
}

pub fn write_cdf(path: impl AsRef<Path>, summaries: &[Summary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "metric", "value", "probability"])?;
    for s in summaries {
        for (v, p) in &s.cdf {
            w.write_record([s.method.clone(), s.metric.to_string(), v.to_string(), p.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `rates.csv`, `cdf.csv` and `summary.json` into `dir`.
pub fn write_report(dir: impl AsRef<Path>, config: &SimConfig, reports: &[DropReport]) -> Result<RunSummary> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let rows: Vec<RateRow> = reports.iter().flat_map(|r| r.rows.clone()).collect();
    write_records(dir.join(RATES_FILE), &records(&rows))?;
    let summary = summarize(config, reports)?;
    write_cdf(dir.join(CDF_FILE), &summary.percentiles)?;
    std::fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<RunSummary> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Formats a percentile table.
pub fn format_table(summaries: &[Summary]) -> String {
    let mut out = format!("{:<22} {:<8} {:>7} {:>10} {:>10}\n", "method", "metric", "n", "p5", "median");
    for s in summaries {
        out += &format!(
            "{:<22} {:<8} {:>7} {:>10.4} {:>10.4}\n",
            s.method, s.metric, s.n, s.p5, s.median
        );
    }
    out
}

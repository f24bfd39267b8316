//! Greedy formation of disjoint antenna/user clusters.
//!
//! Three stages: one antenna per user, pairwise merging, then growing
//! clusters with leftover antennas. Each mutation is kept only if the sum of
//! the worst `ceil(K/4)` user rates strictly increases.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::Deployment;
use crate::codes::CodeId;
use crate::error::{Error, Result};
use crate::rates::RateEngine;

/// Slots in the interference accounting window; a multiple of every code
/// period.
pub const FRAME_SLOTS: usize = 8;

/// Antennas per code and the maximum number of users it can carry.
const MAX_USERS: [usize; 4] = [1, 2, 3, 6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub antennas: Vec<usize>,
    pub ues: Vec<usize>,
}

impl Cluster {
    pub fn new(antennas: Vec<usize>, ues: Vec<usize>) -> Self {
        Cluster { antennas, ues }
    }

    pub fn is_feasible(&self) -> bool {
        let a = self.antennas.len();
        (1..=4).contains(&a) && !self.ues.is_empty() && self.ues.len() <= MAX_USERS[a - 1]
    }

    /// Panics on an infeasible cluster.
    pub fn code(&self) -> CodeId {
        CodeId::for_antennas(self.antennas.len()).expect("cluster has 1..=4 antennas")
    }

    /// Row of the cluster-type table, 1 through 12.
    pub fn type_id(&self) -> Option<u8> {
        if !self.is_feasible() {
            return None;
        }
        let id = match (self.antennas.len(), self.ues.len()) {
            (1, 1) => 1,
            (2, 1) => 2,
            (3, 1) => 3,
            (4, 1) => 4,
            (2, 2) => 5,
            (3, 2) => 6,
            (4, 2) => 7,
            (3, 3) => 8,
            (4, 3) => 9,
            (4, 4) => 10,
            (4, 5) => 11,
            (4, 6) => 12,
            _ => return None,
        };
        Some(id)
    }

    /// User carried by each symbol of one code block.
    pub fn symbol_map(&self) -> Vec<usize> {
        let p = self.code().p_syms();
        (0..p).map(|i| self.ues[i % self.ues.len()]).collect()
    }

    /// Symbol indices (within one code block) carried for the user at `pos`.
    pub fn symbols_of(&self, pos: usize) -> Vec<usize> {
        let n = self.ues.len();
        (0..self.code().p_syms()).filter(|p| p % n == pos).collect()
    }

    /// Code blocks per accounting window.
    pub fn repeats(&self) -> usize {
        FRAME_SLOTS / self.code().t_period()
    }

    /// `|S_k|`: symbols for the user at `pos` per accounting window.
    pub fn symbols_per_frame(&self, pos: usize) -> usize {
        self.repeats() * self.symbols_of(pos).len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub clusters: Vec<Cluster>,
    pub unused_antennas: BTreeSet<usize>,
}

#[derive(Serialize)]
struct ClusterView<'a> {
    antennas: &'a [usize],
    ues: &'a [usize],
    code: CodeId,
    type_id: Option<u8>,
    symbol_map: Vec<usize>,
}

#[derive(Serialize)]
struct AssignmentView<'a> {
    t0: usize,
    clusters: Vec<ClusterView<'a>>,
    unused_antennas: &'a BTreeSet<usize>,
}

impl ClusterAssignment {
    pub fn t0(&self) -> usize {
        FRAME_SLOTS
    }

    /// `(cluster index, position within its user list)`.
    pub fn cluster_of_user(&self, k: usize) -> Option<(usize, usize)> {
        self.clusters
            .iter()
            .enumerate()
            .find_map(|(c, cl)| cl.ues.iter().position(|&u| u == k).map(|p| (c, p)))
    }

    /// Checks disjointness, user coverage, antenna bookkeeping and cluster
    /// feasibility.
    pub fn validate(&self, total_antennas: usize, k_ues: usize) -> Result<()> {
        let mut seen_ue = vec![false; k_ues];
        let mut seen_ant = vec![false; total_antennas];
        for cl in &self.clusters {
            if !cl.is_feasible() {
                return Err(Error::Config(format!(
                    "cluster with {} antennas and {} users matches no cluster type",
                    cl.antennas.len(),
                    cl.ues.len()
                )));
            }
            for &u in &cl.ues {
                if u >= k_ues || std::mem::replace(&mut seen_ue[u], true) {
                    return Err(Error::Config(format!("user {u} missing or repeated")));
                }
            }
            for &a in &cl.antennas {
                if a >= total_antennas || std::mem::replace(&mut seen_ant[a], true) {
                    return Err(Error::Config(format!("antenna {a} invalid or shared")));
                }
            }
        }
        for &a in &self.unused_antennas {
            if a >= total_antennas || std::mem::replace(&mut seen_ant[a], true) {
                return Err(Error::Config(format!("antenna {a} listed as unused but taken")));
            }
        }
        if let Some(u) = seen_ue.iter().position(|s| !s) {
            return Err(Error::Config(format!("user {u} not assigned")));
        }
        if let Some(a) = seen_ant.iter().position(|s| !s) {
            return Err(Error::Config(format!("antenna {a} unaccounted for")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let view = AssignmentView {
            t0: self.t0(),
            clusters: self
                .clusters
                .iter()
                .map(|c| ClusterView {
                    antennas: &c.antennas,
                    ues: &c.ues,
                    code: c.code(),
                    type_id: c.type_id(),
                    symbol_map: c.symbol_map(),
                })
                .collect(),
            unused_antennas: &self.unused_antennas,
        };
        Ok(serde_json::to_string_pretty(&view)?)
    }

    /// Reads the layout written by [`to_json`](Self::to_json); derived fields
    /// are ignored.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Work counters and the objective after every committed mutation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusteringTrace {
    pub merge_trials: usize,
    pub add_trials: usize,
    pub objective: Vec<f64>,
    pub clusters_after_merge: usize,
}

fn choose(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

impl ClusteringTrace {
    /// Upper bound on merge trials for `k` users ending with `c` clusters.
    pub fn merge_bound(k: usize, c: usize) -> usize {
        choose(k + 1, 3) - choose(c, 3)
    }

    /// Upper bound on antenna trials.
    pub fn add_bound(total_antennas: usize, k: usize, c: usize) -> usize {
        total_antennas.saturating_sub(k) * c
    }
}

/// Sum of the `ceil(K/4)` smallest values.
pub fn objective_worst_quartile(se: &[f64]) -> f64 {
    let n = se.len().div_ceil(4).max(1).min(se.len());
    let mut v = se.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[..n].iter().sum()
}

/// Users sorted by ascending best gain; each takes the lowest free antenna of
/// its best RU, preferring RUs no earlier user has taken.
pub fn step1_one_to_one(dep: &Deployment) -> Result<ClusterAssignment> {
    let (m, k, l) = (dep.m_rus(), dep.k_ues(), dep.l_per_ru);
    if m * l < k {
        return Err(Error::TooFewAntennas {
            antennas: m * l,
            users: k,
        });
    }
    let best = |u: usize| (0..m).map(|r| dep.beta(r, u)).fold(f64::NEG_INFINITY, f64::max);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| best(a).partial_cmp(&best(b)).unwrap().then(a.cmp(&b)));

    let mut taken = vec![0usize; m];
    let mut clusters = Vec::with_capacity(k);
    for u in order {
        let pick = |allow_shared: bool| {
            (0..m)
                .filter(|&r| taken[r] < l && (allow_shared || taken[r] == 0))
                .fold(None, |acc: Option<usize>, r| match acc {
                    Some(b) if dep.beta(b, u) >= dep.beta(r, u) => Some(b),
                    _ => Some(r),
                })
        };
        let ru = pick(false).or_else(|| pick(true)).expect("antenna count checked");
        clusters.push(Cluster::new(vec![ru * l + taken[ru]], vec![u]));
        taken[ru] += 1;
    }
    let used: BTreeSet<usize> = clusters.iter().flat_map(|c| c.antennas.clone()).collect();
    let unused_antennas = (0..m * l).filter(|a| !used.contains(a)).collect();
    Ok(ClusterAssignment {
        clusters,
        unused_antennas,
    })
}

/// Per-user rates and the cluster priority order (ascending worst member).
fn evaluate(engine: &RateEngine, a: &ClusterAssignment, dep: &Deployment) -> Result<(Vec<f64>, Vec<usize>)> {
    let se: Vec<f64> = engine.ergodic_se_all(a, dep)?.iter().map(|r| r.se).collect();
    let worst: Vec<f64> = a
        .clusters
        .iter()
        .map(|c| c.ues.iter().map(|&u| se[u]).fold(f64::INFINITY, f64::min))
        .collect();
    let mut order: Vec<usize> = (0..a.clusters.len()).collect();
    order.sort_by(|&x, &y| worst[x].partial_cmp(&worst[y]).unwrap().then(x.cmp(&y)));
    Ok((se, order))
}

fn merged(a: &ClusterAssignment, first: usize, second: usize) -> Option<ClusterAssignment> {
    let (c1, c2) = (&a.clusters[first], &a.clusters[second]);
    let cl = Cluster::new(
        c1.antennas.iter().chain(&c2.antennas).copied().collect(),
        c1.ues.iter().chain(&c2.ues).copied().collect(),
    );
    if !cl.is_feasible() {
        return None;
    }
    let mut out = a.clone();
    let (lo, hi) = (first.min(second), first.max(second));
    out.clusters[lo] = cl;
    out.clusters.remove(hi);
    Some(out)
}

/// Merges cluster pairs while the objective strictly improves. Pairs are
/// scanned in priority order and the scan restarts after every commit.
pub fn step2_merge(
    assignment: ClusterAssignment,
    dep: &Deployment,
    engine: &RateEngine,
    trace: &mut ClusteringTrace,
) -> Result<ClusterAssignment> {
    let mut current = assignment;
    let (se, mut order) = evaluate(engine, &current, dep)?;
    let mut best = objective_worst_quartile(&se);
    if trace.objective.is_empty() {
        trace.objective.push(best);
    }
    'outer: loop {
        for i in 0..order.len() {
            for j in i + 1..order.len() {
                let Some(candidate) = merged(&current, order[i], order[j]) else {
                    continue;
                };
                trace.merge_trials += 1;
                let (se, cand_order) = evaluate(engine, &candidate, dep)?;
                let value = objective_worst_quartile(&se);
                if value > best {
                    best = value;
                    trace.objective.push(value);
                    current = candidate;
                    order = cand_order;
                    continue 'outer;
                }
            }
        }
        break;
    }
    trace.clusters_after_merge = current.clusters.len();
    Ok(current)
}

/// Grows clusters with unused antennas while the objective strictly
/// improves. Each (cluster, antenna) pair is evaluated at most once.
pub fn step3_add_antennas(
    assignment: ClusterAssignment,
    dep: &Deployment,
    engine: &RateEngine,
    trace: &mut ClusteringTrace,
) -> Result<ClusterAssignment> {
    let mut current = assignment;
    let (se, mut order) = evaluate(engine, &current, dep)?;
    let mut best = objective_worst_quartile(&se);
    if trace.objective.is_empty() {
        trace.objective.push(best);
    }
    let mut tested: BTreeSet<(usize, usize)> = BTreeSet::new();
    'outer: loop {
        for &c in &order {
            if current.clusters[c].antennas.len() >= 4 {
                continue;
            }
            let free: Vec<usize> = current.unused_antennas.iter().copied().collect();
            for a in free {
                if !tested.insert((c, a)) {
                    continue;
                }
                let mut candidate = current.clone();
                candidate.clusters[c].antennas.push(a);
                candidate.unused_antennas.remove(&a);
                if !candidate.clusters[c].is_feasible() {
                    continue;
                }
                trace.add_trials += 1;
                let (se, cand_order) = evaluate(engine, &candidate, dep)?;
                let value = objective_worst_quartile(&se);
                if value > best {
                    best = value;
                    trace.objective.push(value);
                    current = candidate;
                    order = cand_order;
                    continue 'outer;
                }
            }
        }
        break;
    }
    Ok(current)
}

/// Runs all three stages.
pub fn cluster_users(dep: &Deployment, engine: &RateEngine) -> Result<(ClusterAssignment, ClusteringTrace)> {
    let mut trace = ClusteringTrace::default();
    let a = step1_one_to_one(dep)?;
    let a = step2_merge(a, dep, engine, &mut trace)?;
    let a = step3_add_antennas(a, dep, engine, &mut trace)?;
    Ok((a, trace))
}

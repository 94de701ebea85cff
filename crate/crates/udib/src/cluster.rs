//! Hard clustering of an embedding set under a distance-plus-entropy loss.
//!
//! Each point x is scored against a non-empty cluster c through the affinity
//!
//! ```text
//! affinity(x, c) = ‖x − μ_c‖² + v_c − τ·ln q_c
//! ```
//!
//! where μ_c is the cluster mean, v_c the mean squared distance of the
//! members to μ_c (the spread), and q_c = n_c/N the cluster weight. The first
//! two terms equal the mean squared distance from x to every member of c, so
//! the rule prefers tight, nearby clusters; −τ·ln q_c discounts small ones.
//! The matching corpus-level loss is
//!
//! ```text
//! L = mean_i [ ‖xᵢ − μ_c(i)‖² + v_c(i) ] + τ·H[q]        (H in nats)
//! ```
//!
//! τ ≥ 0 is the single temperature-style knob: at τ = 0 the assignment is a
//! spread-aware K-means step, while a large τ collapses the corpus into one
//! cluster.
//!
//! A run starts from uniformly random labels over `k_max` clusters drawn
//! from a seeded generator, then repeats synchronous sweeps: every point is
//! rescored against the statistics of the previous sweep (its own previous
//! membership included) and all labels switch at once. Clusters that empty
//! out are pruned immediately and can never be revived. The run stops at an
//! assignment fixed point or after `max_iter` sweeps, whichever comes first,
//! and is a pure function of the embedding set and the configuration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::EmbeddingSet;
use crate::math;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("assignment vector has length {got}, corpus has {expected} records")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no non-empty clusters to assign against")]
    NoClusters,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, ClusterError>;

/// Run parameters. `k_max` only caps the cluster count: the run may finish
/// with fewer clusters, and typically does for larger `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UdibConfig {
    pub k_max: usize,
    pub tau: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl UdibConfig {
    pub fn new(k_max: usize, tau: f64, seed: u64) -> Self {
        UdibConfig {
            k_max,
            tau,
            max_iter: DEFAULT_MAX_ITER,
            seed,
        }
    }

    fn validate(&self, n_points: usize) -> Result<()> {
        if self.k_max < 1 || self.k_max > n_points {
            return Err(ClusterError::InvalidConfig(format!(
                "k_max must lie in 1..={n_points}, got {}",
                self.k_max
            )));
        }
        if !self.tau.is_finite() || self.tau < 0.0 {
            return Err(ClusterError::InvalidConfig(format!(
                "tau must be finite and non-negative, got {}",
                self.tau
            )));
        }
        if self.max_iter < 1 {
            return Err(ClusterError::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Summary of one non-empty cluster. `label` is the cluster's index in the
/// assignment vector the statistics were computed from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterInfo {
    pub label: usize,
    pub count: usize,
    pub mean: Vec<f64>,
    pub spread: f64,
    pub weight: f64,
}

/// Statistics of every non-empty cluster, ordered by ascending label.
/// Weights sum to 1 and a singleton cluster has spread exactly 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    clusters: Vec<ClusterInfo>,
    n_points: usize,
}

impl ClusterStats {
    pub fn clusters(&self) -> &[ClusterInfo] {
        &self.clusters
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Number of non-empty clusters.
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn get(&self, label: usize) -> Option<&ClusterInfo> {
        self.clusters.iter().find(|c| c.label == label)
    }

    fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.clusters.iter().map(|c| c.weight)
    }
}

/// Computes per-cluster statistics from an assignment vector. Labels with no
/// members simply do not appear.
pub fn cluster_stats(set: &EmbeddingSet, assignments: &[usize]) -> Result<ClusterStats> {
    let n = set.len();
    if assignments.len() != n {
        return Err(ClusterError::LengthMismatch {
            expected: n,
            got: assignments.len(),
        });
    }
    let dim = set.dim();
    let max_label = assignments.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; max_label + 1];
    for &a in assignments {
        counts[a] += 1;
    }

    let mut slot = vec![usize::MAX; max_label + 1];
    let mut clusters: Vec<ClusterInfo> = Vec::new();
    for (label, &count) in counts.iter().enumerate() {
        if count > 0 {
            slot[label] = clusters.len();
            clusters.push(ClusterInfo {
                label,
                count,
                mean: vec![0.0; dim],
                spread: 0.0,
                weight: count as f64 / n as f64,
            });
        }
    }

    for (i, &a) in assignments.iter().enumerate() {
        let mean = &mut clusters[slot[a]].mean;
        for (m, v) in mean.iter_mut().zip(set.vector(i)) {
            *m += v;
        }
    }
    for c in clusters.iter_mut() {
        let inv = 1.0 / c.count as f64;
        for m in c.mean.iter_mut() {
            *m *= inv;
        }
    }
    for (i, &a) in assignments.iter().enumerate() {
        let c = &mut clusters[slot[a]];
        c.spread += math::sq_dist(set.vector(i), &c.mean);
    }
    for c in clusters.iter_mut() {
        c.spread /= c.count as f64;
    }

    Ok(ClusterStats {
        clusters,
        n_points: n,
    })
}

/// Affinity of a point to one cluster: mean squared distance from `x` to the
/// cluster's members (via the mean-plus-spread identity) minus the weight
/// bonus τ·ln q_c. Lower is better.
pub fn cluster_affinity(x: &[f64], cluster: &ClusterInfo, tau: f64) -> f64 {
    let penalty = cluster.spread - tau * cluster.weight.ln();
    math::sq_dist(x, &cluster.mean) + penalty
}

struct AffinityTable<'a> {
    clusters: &'a [ClusterInfo],
    // spread − τ·ln q per cluster, hoisted out of the point loop. The sum
    // below mirrors cluster_affinity exactly, so both paths agree bit for
    // bit, ties included.
    penalties: Vec<f64>,
}

impl<'a> AffinityTable<'a> {
    fn new(stats: &'a ClusterStats, tau: f64) -> Result<Self> {
        if stats.clusters.is_empty() {
            return Err(ClusterError::NoClusters);
        }
        let penalties = stats
            .clusters
            .iter()
            .map(|c| c.spread - tau * c.weight.ln())
            .collect();
        Ok(AffinityTable {
            clusters: &stats.clusters,
            penalties,
        })
    }

    fn best_label(&self, x: &[f64]) -> usize {
        let mut best = f64::INFINITY;
        let mut label = self.clusters[0].label;
        for (c, &penalty) in self.clusters.iter().zip(&self.penalties) {
            let a = math::sq_dist(x, &c.mean) + penalty;
            // strict `<` keeps the lowest label on exact ties
            if a < best {
                best = a;
                label = c.label;
            }
        }
        label
    }
}

/// One synchronous sweep: every point moves to its argmin-affinity cluster,
/// judged against `stats` from the previous sweep. Exact ties go to the
/// lowest cluster label.
pub fn assignment_step(set: &EmbeddingSet, stats: &ClusterStats, tau: f64) -> Result<Vec<usize>> {
    let table = AffinityTable::new(stats, tau)?;
    #[cfg(feature = "parallel")]
    {
        Ok((0..set.len())
            .into_par_iter()
            .map(|i| table.best_label(set.vector(i)))
            .collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok((0..set.len()).map(|i| table.best_label(set.vector(i))).collect())
    }
}

/// Reference sweep used to verify and benchmark the parallel path; always
/// produces exactly the same labels as [`assignment_step`].
pub fn assignment_step_sequential(
    set: &EmbeddingSet,
    stats: &ClusterStats,
    tau: f64,
) -> Result<Vec<usize>> {
    let table = AffinityTable::new(stats, tau)?;
    Ok((0..set.len()).map(|i| table.best_label(set.vector(i))).collect())
}

/// Loss of an assignment: mean member-to-member squared distance plus the
/// entropy regularizer τ·H[q] (nats). `total` is exactly the sum of the two
/// terms, and the regularizer is exactly 0 when τ = 0 or only one cluster is
/// populated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub distance_term: f64,
    pub regularization_term: f64,
    pub total: f64,
}

pub fn total_loss(set: &EmbeddingSet, assignments: &[usize], tau: f64) -> Result<LossBreakdown> {
    let stats = cluster_stats(set, assignments)?;
    loss_given_stats(set, assignments, &stats, tau)
}

fn loss_given_stats(
    set: &EmbeddingSet,
    assignments: &[usize],
    stats: &ClusterStats,
    tau: f64,
) -> Result<LossBreakdown> {
    let mut slot = vec![usize::MAX; stats.clusters.last().map_or(0, |c| c.label) + 1];
    for (s, c) in stats.clusters.iter().enumerate() {
        slot[c.label] = s;
    }
    let mut distance = 0.0;
    for (i, &a) in assignments.iter().enumerate() {
        let c = &stats.clusters[slot[a]];
        distance += math::sq_dist(set.vector(i), &c.mean) + c.spread;
    }
    let distance_term = distance / set.len() as f64;
    let regularization_term = tau * math::entropy_nats(stats.weights());
    Ok(LossBreakdown {
        distance_term,
        regularization_term,
        total: distance_term + regularization_term,
    })
}

/// Outcome of a clustering run. Labels are compacted to `0..k_final` in
/// order of first appearance along the corpus, so the result is stable under
/// serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub k_final: usize,
    pub tau: f64,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub entropy_bits: f64,
    pub loss: LossBreakdown,
    pub assignments: Vec<usize>,
}

/// Runs the full clustering loop described in the module docs. Deterministic
/// for a given set and configuration.
pub fn run_udib(set: &EmbeddingSet, config: &UdibConfig) -> Result<ClusteringResult> {
    config.validate(set.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut assignments: Vec<usize> = (0..set.len())
        .map(|_| rng.random_range(0..config.k_max))
        .collect();

    let mut iterations = 0;
    let mut converged = false;
    let mut stats = cluster_stats(set, &assignments)?;
    while iterations < config.max_iter {
        let next = assignment_step(set, &stats, config.tau)?;
        iterations += 1;
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
        stats = cluster_stats(set, &assignments)?;
    }

    let loss = loss_given_stats(set, &assignments, &stats, config.tau)?;
    let entropy_bits = math::entropy_nats(stats.weights()) / std::f64::consts::LN_2;
    let k_final = compact_labels(&mut assignments);
    debug_assert_eq!(k_final, stats.k());

    Ok(ClusteringResult {
        k_final,
        tau: config.tau,
        seed: config.seed,
        iterations,
        converged,
        entropy_bits,
        loss,
        assignments,
    })
}

/// Relabels in place to `0..k` in order of first appearance; returns `k`.
fn compact_labels(assignments: &mut [usize]) -> usize {
    let max_label = assignments.iter().copied().max().unwrap_or(0);
    let mut remap = vec![usize::MAX; max_label + 1];
    let mut next = 0;
    for a in assignments.iter_mut() {
        if remap[*a] == usize::MAX {
            remap[*a] = next;
            next += 1;
        }
        *a = remap[*a];
    }
    next
}

//! Choosing a cluster count by sweeping the temperature τ.
//!
//! One sweep runs the clusterer at every τ on a grid with a fixed seed and
//! records, per run, the cluster count and the normalized information
//!
//! ```text
//! normalized_info = H[q] / (mean_sq_pair_dist / 2s²)
//! ```
//!
//! with H in nats. The denominator caps the information any clustering of
//! the corpus can extract; with the default smoothing scale s² it equals
//! ln N, so normalized_info always lands in [0, 1]. Deduplicating the sweep
//! by cluster count (keeping the lowest-loss run per count) yields the
//! information curve: normalized_info as a function of n_clusters.
//!
//! Two heuristics read a knee off that curve after min-max normalization to
//! the unit square. The kink angle fits least-squares lines over a window
//! entering and a window leaving each interior point and reports the change
//! in tangent direction, in degrees; the elbow picks the point furthest from
//! the chord joining the curve's endpoints. Repeating the sweep over several
//! seeds and taking the mode of the per-seed recommendations gives the final
//! cluster count, reported together with per-method mean ± population-std
//! rows and the τ-stability bounds of the recommended count.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{run_udib, ClusterError, UdibConfig, DEFAULT_MAX_ITER};
use crate::corpus::{default_smoothing_scale, pairwise_stats, CorpusError, EmbeddingSet};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const DEFAULT_MIN_CLUSTERS: usize = 3;
pub const DEFAULT_WINDOWS: [usize; 2] = [2, 3];

/// Seeds 0..10, the default replication set.
pub fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

/// 40 geometrically spaced τ values spanning [1e-3, 1].
pub fn default_tau_grid() -> Vec<f64> {
    geometric_grid(1e-3, 1.0, 40).expect("default grid parameters are valid")
}

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("invalid tau grid: {0}")]
    InvalidGrid(String),
    #[error("window must be at least 1")]
    InvalidWindow,
    #[error("curve has {got} points but the heuristic needs at least {needed}")]
    CurveTooShort { needed: usize, got: usize },
    #[error("no curve point passes the minimum-cluster filter")]
    NoEligiblePoint,
    #[error("no input to aggregate")]
    EmptyInput,
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type Result<T> = std::result::Result<T, SelectError>;

/// Geometric grid from `min` to `max` inclusive with `count` points.
pub fn geometric_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite()) || min <= 0.0 {
        return Err(SelectError::InvalidGrid(format!(
            "bounds must be finite and positive, got {min}..{max}"
        )));
    }
    if count < 2 || max <= min {
        return Err(SelectError::InvalidGrid(format!(
            "need max > min and count >= 2, got {min}..{max} with {count} points"
        )));
    }
    let ratio = max / min;
    let mut grid: Vec<f64> = (0..count)
        .map(|i| min * ratio.powf(i as f64 / (count - 1) as f64))
        .collect();
    grid[0] = min;
    grid[count - 1] = max;
    Ok(grid)
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(SelectError::InvalidGrid("grid is empty".into()));
    }
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(SelectError::InvalidGrid(format!(
                "grid must be strictly increasing, got {} after {}",
                w[1], w[0]
            )));
        }
    }
    if grid.iter().any(|t| !t.is_finite() || *t <= 0.0) {
        return Err(SelectError::InvalidGrid("grid values must be finite and positive".into()));
    }
    Ok(())
}

/// One clustering run inside a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub tau: f64,
    pub n_clusters: usize,
    pub entropy_bits: f64,
    pub normalized_info: f64,
    pub distance_term: f64,
    pub regularization_term: f64,
}

impl ProfilePoint {
    pub fn total_loss(&self) -> f64 {
        self.distance_term + self.regularization_term
    }
}

/// A full sweep for one seed. `points` follows grid order; `curve` holds one
/// point per distinct cluster count (the lowest-total-loss run for that
/// count) in ascending count order. If normalized information ever drops by
/// more than 1e-9 from one curve point to the next, the offending curve
/// index is recorded in `monotonicity_violations`; violations are
/// diagnostics, not failures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InformationProfile {
    pub seed: u64,
    pub points: Vec<ProfilePoint>,
    pub curve: Vec<ProfilePoint>,
    pub monotonicity_violations: Vec<usize>,
}

/// Clusters the set at every grid τ with one seed and assembles the profile.
pub fn sweep_tau(set: &EmbeddingSet, grid: &[f64], k_max: usize, seed: u64) -> Result<InformationProfile> {
    validate_grid(grid)?;
    let stats = pairwise_stats(set);
    let s2 = default_smoothing_scale(&stats, set.len())?;
    let info_bound = stats.mean_sq_pair_dist / (2.0 * s2);

    let run_at = |tau: f64| -> Result<ProfilePoint> {
        let result = run_udib(
            set,
            &UdibConfig {
                k_max,
                tau,
                max_iter: DEFAULT_MAX_ITER,
                seed,
            },
        )?;
        Ok(ProfilePoint {
            tau,
            n_clusters: result.k_final,
            entropy_bits: result.entropy_bits,
            normalized_info: result.entropy_bits * LN_2 / info_bound,
            distance_term: result.loss.distance_term,
            regularization_term: result.loss.regularization_term,
        })
    };

    #[cfg(feature = "parallel")]
    let points = grid.par_iter().map(|&t| run_at(t)).collect::<Result<Vec<_>>>()?;
    #[cfg(not(feature = "parallel"))]
    let points = grid.iter().map(|&t| run_at(t)).collect::<Result<Vec<_>>>()?;

    let (curve, monotonicity_violations) = build_curve(&points);
    Ok(InformationProfile {
        seed,
        points,
        curve,
        monotonicity_violations,
    })
}

fn build_curve(points: &[ProfilePoint]) -> (Vec<ProfilePoint>, Vec<usize>) {
    let mut best: BTreeMap<usize, &ProfilePoint> = BTreeMap::new();
    for p in points {
        best.entry(p.n_clusters)
            .and_modify(|cur| {
                if p.total_loss() < cur.total_loss() {
                    *cur = p;
                }
            })
            .or_insert(p);
    }
    let curve: Vec<ProfilePoint> = best.into_values().cloned().collect();
    let violations = curve
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].normalized_info < w[0].normalized_info - 1e-9)
        .map(|(i, _)| i + 1)
        .collect();
    (curve, violations)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeuristicMethod {
    KinkAngle,
    Elbow,
}

/// A knee candidate. `tau_min`/`tau_max` bound the grid τ values whose runs
/// produced exactly `n_clusters` clusters; any grid τ strictly inside those
/// bounds that produced a different count is listed in `stability_gaps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicRecommendation {
    pub method: HeuristicMethod,
    pub window: Option<usize>,
    pub n_clusters: usize,
    pub angle_deg: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub stability_gaps: Vec<f64>,
}

/// Curve mapped onto the unit square. A flat curve keeps y at 0 rather than
/// dividing by a zero extent.
fn normalize_curve(curve: &[ProfilePoint]) -> Vec<(f64, f64)> {
    let x0 = curve[0].n_clusters as f64;
    let x1 = curve[curve.len() - 1].n_clusters as f64;
    let xspan = x1 - x0;
    let ymin = curve.iter().map(|p| p.normalized_info).fold(f64::INFINITY, f64::min);
    let ymax = curve.iter().map(|p| p.normalized_info).fold(f64::NEG_INFINITY, f64::max);
    let yspan = ymax - ymin;
    curve
        .iter()
        .map(|p| {
            let x = (p.n_clusters as f64 - x0) / xspan;
            let y = if yspan > 0.0 {
                (p.normalized_info - ymin) / yspan
            } else {
                0.0
            };
            (x, y)
        })
        .collect()
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let xbar = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in pts {
        num += (x - xbar) * (y - ybar);
        den += (x - xbar) * (x - xbar);
    }
    num / den
}

/// Tangent-direction change at index `m`: fit over the window entering
/// ([m−w, m]) minus fit over the window leaving ([m, m+w]), in degrees.
/// Positive means the curve flattens; a convex stretch gives a negative
/// angle.
fn kink_angle_at(norm: &[(f64, f64)], m: usize, window: usize) -> f64 {
    let slope_in = least_squares_slope(&norm[m - window..=m]);
    let slope_out = least_squares_slope(&norm[m..=m + window]);
    (slope_in.atan() - slope_out.atan()).to_degrees()
}

/// Recommends the interior curve point with the largest kink angle among
/// points with at least `min_clusters` clusters. Exact angle ties go to the
/// smallest cluster count, so a perfectly straight stretch recommends its
/// first eligible point with an angle of 0°.
pub fn kink_angle(
    profile: &InformationProfile,
    window: usize,
    min_clusters: usize,
) -> Result<HeuristicRecommendation> {
    if window == 0 {
        return Err(SelectError::InvalidWindow);
    }
    let curve = &profile.curve;
    let needed = 2 * window + 1;
    if curve.len() < needed {
        return Err(SelectError::CurveTooShort {
            needed,
            got: curve.len(),
        });
    }
    let norm = normalize_curve(curve);
    let mut best: Option<(usize, f64)> = None;
    for m in window..curve.len() - window {
        if curve[m].n_clusters < min_clusters {
            continue;
        }
        let angle = kink_angle_at(&norm, m, window);
        if best.is_none_or(|(_, a)| angle > a) {
            best = Some((m, angle));
        }
    }
    let (m, angle_deg) = best.ok_or(SelectError::NoEligiblePoint)?;
    Ok(recommendation(
        profile,
        HeuristicMethod::KinkAngle,
        Some(window),
        curve[m].n_clusters,
        angle_deg,
    ))
}

/// Recommends the curve point furthest from the chord joining the first and
/// last curve points, among points with at least `min_clusters` clusters.
/// The reported angle is the window-1 kink angle at that point (0 for an
/// endpoint).
pub fn elbow(profile: &InformationProfile, min_clusters: usize) -> Result<HeuristicRecommendation> {
    let curve = &profile.curve;
    if curve.len() < 3 {
        return Err(SelectError::CurveTooShort {
            needed: 3,
            got: curve.len(),
        });
    }
    let norm = normalize_curve(curve);
    let (x0, y0) = norm[0];
    let (x1, y1) = norm[norm.len() - 1];
    let (dx, dy) = (x1 - x0, y1 - y0);
    let chord_len = dx.hypot(dy);
    let mut best: Option<(usize, f64)> = None;
    for (i, &(x, y)) in norm.iter().enumerate() {
        if curve[i].n_clusters < min_clusters {
            continue;
        }
        let dist = (dx * (y - y0) - dy * (x - x0)).abs() / chord_len;
        if best.is_none_or(|(_, d)| dist > d) {
            best = Some((i, dist));
        }
    }
    let (i, _) = best.ok_or(SelectError::NoEligiblePoint)?;
    let angle_deg = if i >= 1 && i + 1 < norm.len() {
        kink_angle_at(&norm, i, 1)
    } else {
        0.0
    };
    Ok(recommendation(profile, HeuristicMethod::Elbow, None, curve[i].n_clusters, angle_deg))
}

fn recommendation(
    profile: &InformationProfile,
    method: HeuristicMethod,
    window: Option<usize>,
    n_clusters: usize,
    angle_deg: f64,
) -> HeuristicRecommendation {
    let (tau_min, tau_max, stability_gaps) = stability(&profile.points, n_clusters);
    HeuristicRecommendation {
        method,
        window,
        n_clusters,
        angle_deg,
        tau_min,
        tau_max,
        stability_gaps,
    }
}

/// τ bounds of the runs that hit `n_clusters`, plus every grid τ strictly
/// inside those bounds whose run produced a different count.
fn stability(points: &[ProfilePoint], n_clusters: usize) -> (f64, f64, Vec<f64>) {
    let mut tau_min = f64::INFINITY;
    let mut tau_max = f64::NEG_INFINITY;
    for p in points {
        if p.n_clusters == n_clusters {
            tau_min = tau_min.min(p.tau);
            tau_max = tau_max.max(p.tau);
        }
    }
    debug_assert!(tau_min.is_finite(), "recommended count must appear in the sweep");
    let gaps = points
        .iter()
        .filter(|p| p.n_clusters != n_clusters && p.tau > tau_min && p.tau < tau_max)
        .map(|p| p.tau)
        .collect();
    (tau_min, tau_max, gaps)
}

/// Combines recommendations (typically kink angles at several windows):
/// smallest cluster count wins, ties go to the largest angle.
pub fn meta_recommend(recs: &[HeuristicRecommendation]) -> Result<HeuristicRecommendation> {
    recs.iter()
        .reduce(|best, r| {
            if r.n_clusters < best.n_clusters
                || (r.n_clusters == best.n_clusters && r.angle_deg > best.angle_deg)
            {
                r
            } else {
                best
            }
        })
        .cloned()
        .ok_or(SelectError::EmptyInput)
}

/// Mean and population standard deviation, rendered as e.g. `10.00 ± 1.84`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.std)
    }
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd {
        mean,
        std: var.sqrt(),
    }
}

/// One heuristic's recommendation for one seed, with the loss split of the
/// recommended curve point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub recommendation: HeuristicRecommendation,
    pub distance_term: f64,
    pub regularization_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub kink_angle: MethodOutcome,
    pub elbow: MethodOutcome,
}

/// Across-seed mean ± std for each reported quantity of one heuristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub n_clusters: MeanStd,
    pub angle_deg: MeanStd,
    pub tau_min: MeanStd,
    pub tau_max: MeanStd,
    pub distance_term: MeanStd,
    pub regularization_term: MeanStd,
}

/// Multi-seed verdict. `final_k` is the mode of the per-seed kink-angle
/// recommendations (ties resolved toward fewer clusters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSeedSummary {
    pub final_k: usize,
    pub per_seed: Vec<SeedOutcome>,
    pub kink_angle: MethodSummary,
    pub elbow: MethodSummary,
}

/// Sweeps every seed. Seeds may run concurrently; profiles come back in
/// seed-list order regardless.
pub fn sweep_profiles(
    set: &EmbeddingSet,
    seeds: &[u64],
    grid: &[f64],
    k_max: usize,
) -> Result<Vec<InformationProfile>> {
    if seeds.is_empty() {
        return Err(SelectError::EmptyInput);
    }
    #[cfg(feature = "parallel")]
    {
        seeds.par_iter().map(|&s| sweep_tau(set, grid, k_max, s)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        seeds.iter().map(|&s| sweep_tau(set, grid, k_max, s)).collect()
    }
}

/// Aggregates already-computed profiles: per seed, the kink angle at every
/// window (windows whose curve is too short are skipped unless none remain)
/// combined by [`meta_recommend`], plus the elbow; then the across-seed mode
/// and mean ± std rows. Deterministic fold in profile order.
pub fn summarize(
    profiles: &[InformationProfile],
    min_clusters: usize,
    windows: &[usize],
) -> Result<MultiSeedSummary> {
    if profiles.is_empty() || windows.is_empty() {
        return Err(SelectError::EmptyInput);
    }
    let mut per_seed = Vec::with_capacity(profiles.len());
    for profile in profiles {
        let mut recs = Vec::new();
        let mut first_err = None;
        for &w in windows {
            match kink_angle(profile, w, min_clusters) {
                Ok(r) => recs.push(r),
                Err(e) => first_err = first_err.or(Some(e)),
            }
        }
        if recs.is_empty() {
            return Err(first_err.expect("windows is non-empty"));
        }
        let kink = meta_recommend(&recs)?;
        let elb = elbow(profile, min_clusters)?;
        per_seed.push(SeedOutcome {
            seed: profile.seed,
            kink_angle: outcome(profile, kink),
            elbow: outcome(profile, elb),
        });
    }

    let final_k = mode_smallest(per_seed.iter().map(|s| s.kink_angle.recommendation.n_clusters));
    let kink_angle = method_summary(per_seed.iter().map(|s| &s.kink_angle));
    let elbow = method_summary(per_seed.iter().map(|s| &s.elbow));
    Ok(MultiSeedSummary {
        final_k,
        per_seed,
        kink_angle,
        elbow,
    })
}

/// Full multi-seed model selection on a corpus.
pub fn multi_seed(
    set: &EmbeddingSet,
    seeds: &[u64],
    grid: &[f64],
    k_max: usize,
    min_clusters: usize,
    windows: &[usize],
) -> Result<MultiSeedSummary> {
    let profiles = sweep_profiles(set, seeds, grid, k_max)?;
    summarize(&profiles, min_clusters, windows)
}

fn outcome(profile: &InformationProfile, recommendation: HeuristicRecommendation) -> MethodOutcome {
    let point = profile
        .curve
        .iter()
        .find(|p| p.n_clusters == recommendation.n_clusters)
        .expect("recommendation points into the curve");
    MethodOutcome {
        distance_term: point.distance_term,
        regularization_term: point.regularization_term,
        recommendation,
    }
}

fn method_summary<'a>(outcomes: impl Iterator<Item = &'a MethodOutcome> + Clone) -> MethodSummary {
    let collect = |f: &dyn Fn(&MethodOutcome) -> f64| -> Vec<f64> { outcomes.clone().map(f).collect() };
    MethodSummary {
        n_clusters: mean_std(&collect(&|o| o.recommendation.n_clusters as f64)),
        angle_deg: mean_std(&collect(&|o| o.recommendation.angle_deg)),
        tau_min: mean_std(&collect(&|o| o.recommendation.tau_min)),
        tau_max: mean_std(&collect(&|o| o.recommendation.tau_max)),
        distance_term: mean_std(&collect(&|o| o.distance_term)),
        regularization_term: mean_std(&collect(&|o| o.regularization_term)),
    }
}

fn mode_smallest(values: impl Iterator<Item = usize>) -> usize {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_insert(0) += 1;
    }
    let mut best = (0usize, 0usize);
    for (&value, &count) in &counts {
        if count > best.1 {
            best = (value, count);
        }
    }
    best.0
}

/// The lowest-loss run across all profiles that finished with exactly `k`
/// clusters; re-running the clusterer at this seed and τ reproduces it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeRun {
    pub seed: u64,
    pub tau: f64,
    pub total_loss: f64,
}

pub fn representative_run(profiles: &[InformationProfile], k: usize) -> Option<RepresentativeRun> {
    let mut best: Option<RepresentativeRun> = None;
    for profile in profiles {
        if let Some(point) = profile.curve.iter().find(|p| p.n_clusters == k) {
            let candidate = RepresentativeRun {
                seed: profile.seed,
                tau: point.tau,
                total_loss: point.total_loss(),
            };
            if best.is_none_or(|b| candidate.total_loss < b.total_loss) {
                best = Some(candidate);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EmbeddingRecord, Role};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn profile_from_curve(points: &[(usize, f64)]) -> InformationProfile {
        let points: Vec<ProfilePoint> = points
            .iter()
            .enumerate()
            .map(|(i, &(n_clusters, normalized_info))| ProfilePoint {
                tau: 0.01 * (i + 1) as f64,
                n_clusters,
                entropy_bits: 0.0,
                normalized_info,
                distance_term: 0.0,
                regularization_term: 0.0,
            })
            .collect();
        let (curve, monotonicity_violations) = build_curve(&points);
        InformationProfile {
            seed: 0,
            points,
            curve,
            monotonicity_violations,
        }
    }

    fn pairs_corpus() -> EmbeddingSet {
        let vectors = [
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![10.0, 0.0],
            vec![10.1, 0.0],
        ];
        let records = vectors
            .iter()
            .enumerate()
            .map(|(i, v)| EmbeddingRecord {
                id: format!("r{i}"),
                role: Role::Prompt,
                group_id: "g".into(),
                generation_id: 0,
                text: None,
                embedding: v.clone(),
            })
            .collect();
        EmbeddingSet::from_records(records).unwrap()
    }

    #[test]
    fn geometric_grid_shape() {
        let grid = geometric_grid(1e-3, 1.0, 40).unwrap();
        assert_eq!(grid.len(), 40);
        assert_eq!(grid[0], 1e-3);
        assert_eq!(grid[39], 1.0);
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
        let ratio = grid[1] / grid[0];
        for w in grid.windows(2) {
            assert_relative_eq!(w[1] / w[0], ratio, max_relative = 1e-9);
        }
        assert!(geometric_grid(0.0, 1.0, 5).is_err());
        assert!(geometric_grid(0.1, 0.1, 5).is_err());
        assert!(geometric_grid(0.1, 1.0, 1).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(
            sweep_tau(&pairs_corpus(), &[], 4, 0),
            Err(SelectError::InvalidGrid(_))
        ));
        assert!(matches!(
            sweep_tau(&pairs_corpus(), &[0.2, 0.1], 4, 0),
            Err(SelectError::InvalidGrid(_))
        ));
        assert!(matches!(
            sweep_tau(&pairs_corpus(), &[-0.1, 0.2], 4, 0),
            Err(SelectError::InvalidGrid(_))
        ));
    }

    #[test]
    fn curve_keeps_lowest_loss_per_count_and_flags_dips() {
        let mk = |tau, n, info, dist| ProfilePoint {
            tau,
            n_clusters: n,
            entropy_bits: 0.0,
            normalized_info: info,
            distance_term: dist,
            regularization_term: 0.0,
        };
        let points = vec![
            mk(0.01, 3, 0.50, 5.0),
            mk(0.02, 3, 0.48, 4.0), // lower loss, kept for n=3
            mk(0.03, 2, 0.60, 6.0), // dips below its predecessor on the curve? no: curve sorts by n
            mk(0.04, 1, 0.00, 9.0),
        ];
        let (curve, violations) = build_curve(&points);
        assert_eq!(
            curve.iter().map(|p| p.n_clusters).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        assert_eq!(curve[2].distance_term, 4.0);
        // curve infos: 0.00, 0.60, 0.48 -> the n=3 point dips
        assert_eq!(violations, vec![2]);
    }

    #[test]
    fn kink_angle_worked_example() {
        let profile = profile_from_curve(&[(1, 0.2), (2, 0.4), (3, 0.6), (4, 0.65), (5, 0.7)]);
        let rec = kink_angle(&profile, 2, 3).unwrap();
        assert_eq!(rec.n_clusters, 3);
        assert!(rec.angle_deg > 0.0);
        // after unit-square normalization the hand-fitted slopes are 1.6 and 0.4
        let expected = (1.6f64.atan() - 0.4f64.atan()).to_degrees();
        assert_relative_eq!(rec.angle_deg, expected, max_relative = 1e-9);
        assert_eq!(rec.window, Some(2));
        assert_eq!(rec.method, HeuristicMethod::KinkAngle);
    }

    #[test]
    fn kink_angle_straight_line_returns_zero_at_lowest_count() {
        let curve: Vec<(usize, f64)> = (1..=7).map(|k| (k, 0.1 * k as f64)).collect();
        let profile = profile_from_curve(&curve);
        let rec = kink_angle(&profile, 2, 3).unwrap();
        assert_abs_diff_eq!(rec.angle_deg, 0.0, epsilon = 1e-9);
        assert_eq!(rec.n_clusters, 3, "lowest eligible count wins ties");
    }

    #[test]
    fn kink_angle_flat_curve_is_exactly_zero() {
        // zero vertical extent normalizes to a flat line, so both fitted
        // slopes are exactly 0.0 and so is the angle
        let profile = profile_from_curve(&[(1, 0.4), (2, 0.4), (3, 0.4), (4, 0.4), (5, 0.4)]);
        let rec = kink_angle(&profile, 1, 1).unwrap();
        assert_eq!(rec.angle_deg, 0.0);
        assert_eq!(rec.n_clusters, 2, "lowest count the window can reach");
    }

    #[test]
    fn kink_angle_can_be_negative() {
        // accelerating curve: slope grows, so every interior angle is negative
        let profile = profile_from_curve(&[(1, 0.0), (2, 0.05), (3, 0.15), (4, 0.4), (5, 1.0)]);
        let rec = kink_angle(&profile, 1, 1).unwrap();
        assert!(rec.angle_deg < 0.0);
    }

    #[test]
    fn kink_angle_errors() {
        let profile = profile_from_curve(&[(1, 0.1), (2, 0.2), (3, 0.3), (4, 0.4)]);
        assert!(matches!(
            kink_angle(&profile, 2, 3),
            Err(SelectError::CurveTooShort { needed: 5, got: 4 })
        ));
        assert!(matches!(kink_angle(&profile, 0, 1), Err(SelectError::InvalidWindow)));
        let longer = profile_from_curve(&[(1, 0.1), (2, 0.2), (3, 0.3), (4, 0.4), (5, 0.5)]);
        assert!(matches!(
            kink_angle(&longer, 2, 10),
            Err(SelectError::NoEligiblePoint)
        ));
    }

    #[test]
    fn elbow_worked_example() {
        let profile = profile_from_curve(&[(1, 0.0), (2, 0.8), (3, 0.95), (4, 1.0)]);
        let rec = elbow(&profile, 1).unwrap();
        assert_eq!(rec.n_clusters, 2);
        assert_eq!(rec.method, HeuristicMethod::Elbow);
        assert_eq!(rec.window, None);
        // reported angle is the window-1 kink angle at the elbow
        let expected = ((0.8f64 / (1.0 / 3.0)).atan() - (0.15f64 / (1.0 / 3.0)).atan()).to_degrees();
        assert_relative_eq!(rec.angle_deg, expected, max_relative = 1e-9);
    }

    #[test]
    fn elbow_errors() {
        let short = profile_from_curve(&[(1, 0.0), (2, 1.0)]);
        assert!(matches!(
            elbow(&short, 1),
            Err(SelectError::CurveTooShort { needed: 3, got: 2 })
        ));
        let profile = profile_from_curve(&[(1, 0.0), (2, 0.8), (3, 1.0)]);
        assert!(matches!(elbow(&profile, 9), Err(SelectError::NoEligiblePoint)));
    }

    #[test]
    fn stability_bounds_and_gaps() {
        let mk = |tau, n| ProfilePoint {
            tau,
            n_clusters: n,
            entropy_bits: 0.0,
            normalized_info: 0.0,
            distance_term: 0.0,
            regularization_term: 0.0,
        };
        let points = vec![mk(0.1, 4), mk(0.2, 5), mk(0.3, 4), mk(0.4, 2)];
        let (tau_min, tau_max, gaps) = stability(&points, 4);
        assert_eq!((tau_min, tau_max), (0.1, 0.3));
        assert_eq!(gaps, vec![0.2]);
    }

    #[test]
    fn meta_recommendation_rules() {
        let rec = |n, angle| HeuristicRecommendation {
            method: HeuristicMethod::KinkAngle,
            window: Some(2),
            n_clusters: n,
            angle_deg: angle,
            tau_min: 0.0,
            tau_max: 1.0,
            stability_gaps: vec![],
        };
        let chosen = meta_recommend(&[rec(6, 50.0), rec(4, 30.0)]).unwrap();
        assert_eq!(chosen.n_clusters, 4, "smallest count wins");
        let chosen = meta_recommend(&[rec(4, 30.0), rec(4, 45.0)]).unwrap();
        assert_eq!(chosen.angle_deg, 45.0, "angle breaks count ties");
        assert!(matches!(meta_recommend(&[]), Err(SelectError::EmptyInput)));
    }

    #[test]
    fn mode_prefers_smaller_count_on_ties() {
        assert_eq!(mode_smallest([10, 10, 8, 10, 12].into_iter()), 10);
        assert_eq!(mode_smallest([8, 8, 10, 10].into_iter()), 8);
        assert_eq!(mode_smallest([5].into_iter()), 5);
    }

    #[test]
    fn mean_std_rendering() {
        let ms = mean_std(&[8.16, 11.84]);
        assert_abs_diff_eq!(ms.mean, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ms.std, 1.84, epsilon = 1e-12);
        assert_eq!(ms.to_string(), "10.00 ± 1.84");
        let ms = mean_std(&[10.0, 10.0, 8.0, 10.0, 12.0]);
        assert_abs_diff_eq!(ms.mean, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ms.std, 1.6f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn sweep_profile_structure() {
        let set = pairs_corpus();
        let profile = sweep_tau(&set, &[0.001, 0.05, 100.0], 4, 0).unwrap();
        assert_eq!(profile.points.len(), 3);
        assert!(profile.points.iter().all(|p| (0.0..=1.0).contains(&p.normalized_info)));
        assert!(profile.curve.windows(2).all(|w| w[0].n_clusters < w[1].n_clusters));
        assert_eq!(profile.points[1].n_clusters, 2, "mid tau recovers the pairs");
        assert_eq!(profile.points[2].n_clusters, 1, "huge tau collapses");
    }

    /// Three pairs at three separation scales, so sweeping tau walks
    /// through several cluster counts and every seed yields a curve long
    /// enough for the window heuristics.
    fn three_scale_corpus() -> EmbeddingSet {
        let xs = [0.0, 0.1, 1.5, 1.6, 40.0, 40.1];
        let records = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| EmbeddingRecord {
                id: format!("r{i}"),
                role: Role::Prompt,
                group_id: "g".into(),
                generation_id: 0,
                text: None,
                embedding: vec![x, 0.0],
            })
            .collect();
        EmbeddingSet::from_records(records).unwrap()
    }

    #[test]
    fn multi_seed_is_deterministic_and_recommends_the_middle_scale() {
        let set = three_scale_corpus();
        // seeds whose sweeps visit three cluster counts, so the window-1
        // heuristics have an interior point to rate
        let seeds = [6, 8, 22];
        let grid = [1e-4, 0.01, 3.0, 1e4];
        let a = multi_seed(&set, &seeds, &grid, 6, 1, &[1]).unwrap();
        let b = multi_seed(&set, &seeds, &grid, 6, 1, &[1]).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.per_seed.len(), 3);
        for s in &a.per_seed {
            assert_eq!(s.kink_angle.recommendation.n_clusters, 2, "seed {}", s.seed);
            assert_eq!(s.elbow.recommendation.n_clusters, 2, "seed {}", s.seed);
        }
        assert_eq!(a.final_k, 2);
        assert_eq!(a.kink_angle.n_clusters.to_string(), "2.00 ± 0.00");
        assert!(matches!(
            multi_seed(&set, &[], &grid, 6, 1, &[1]),
            Err(SelectError::EmptyInput)
        ));
    }

    #[test]
    fn representative_run_takes_lowest_loss_then_first_seed() {
        let mk_profile = |seed, tau, total| {
            let p = ProfilePoint {
                tau,
                n_clusters: 4,
                entropy_bits: 2.0,
                normalized_info: 0.5,
                distance_term: total,
                regularization_term: 0.0,
            };
            InformationProfile {
                seed,
                points: vec![p.clone()],
                curve: vec![p],
                monotonicity_violations: vec![],
            }
        };
        let profiles = vec![mk_profile(0, 0.1, 5.0), mk_profile(1, 0.2, 3.0), mk_profile(2, 0.3, 3.0)];
        let rep = representative_run(&profiles, 4).unwrap();
        assert_eq!((rep.seed, rep.tau), (1, 0.2));
        assert!(representative_run(&profiles, 7).is_none());
    }
}

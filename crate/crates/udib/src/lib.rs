//! Clustering and divergence analysis for sentence-embedding corpora.
//!
//! The pipeline has three stages, each usable on its own:
//!
//! 1. [`corpus`] loads JSONL embedding records, validates them, and exposes
//!    pooled geometry (centroid, variance, mean squared pair distance).
//! 2. [`cluster`] partitions the vectors with a hard assignment rule that
//!    trades squared-distance distortion against an entropy regularizer
//!    controlled by a single temperature `tau`. [`select`] sweeps `tau`,
//!    builds loss-vs-cluster-count curves, and picks a cluster count via
//!    kink-angle and elbow heuristics aggregated over seeds.
//! 3. [`sdm`] compares how the prompt and answer sides of a corpus use the
//!    discovered clusters, reporting entropies, KL and Jensen–Shannon
//!    divergences, and co-occurrence mutual information in bits.
//!
//! Determinism is a design goal throughout: runs are keyed by explicit
//! seeds, parallel and sequential execution produce bit-identical results,
//! and serialized outputs contain no timestamps or machine-specific state.
//!
//! The `parallel` feature (on by default) runs the assignment step, the
//! temperature sweep, and the seed ensemble on a rayon pool. Disabling it
//! leaves a dependency-light sequential build that returns the same bytes.

pub mod cluster;
pub mod corpus;
mod math;
pub mod sdm;
pub mod select;

pub use cluster::{
    cluster_affinity, cluster_stats, run_udib, total_loss, ClusterError, ClusterStats,
    ClusteringResult, LossBreakdown, UdibConfig,
};
pub use corpus::{
    default_smoothing_scale, pairwise_stats, parse_corpus, CorpusError, EmbeddingRecord,
    EmbeddingSet, PairwiseStats, Role,
};
pub use sdm::{
    cooccurrence, entropy_bits, jsd_bits, kl_bits, mutual_info_bits, sdm_report,
    CooccurrenceMatrix, SdmError, SdmReport, Selector, TopicDistribution,
};
pub use select::{
    default_seeds, default_tau_grid, geometric_grid, multi_seed, representative_run, summarize,
    sweep_profiles, sweep_tau, HeuristicMethod, HeuristicRecommendation, InformationProfile,
    MultiSeedSummary, ProfilePoint, SelectError,
};

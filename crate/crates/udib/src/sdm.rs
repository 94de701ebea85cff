//! Topic-usage divergence between the prompt and answer sides of a corpus.
//!
//! A clustering of the corpus defines k topics. Counting how often a slice
//! of the corpus (a role, a group, one generation) lands in each topic and
//! smoothing the counts additively,
//!
//! ```text
//! p[t] = (count[t] + alpha) / (total + k·alpha)
//! ```
//!
//! yields topic distributions that can be compared with the usual
//! information measures. Everything here reports in bits.
//!
//! Two comparison scopes are used throughout. Global metrics pool all prompt
//! sentences into one distribution and all answer sentences into another.
//! Ensemble metrics iterate over prompt–answer pairs: each distinct
//! `(group_id, generation_id)` carried by answer records forms a pair whose
//! answer side is those records and whose prompt side is the prompt records
//! of the same group (pooled over prompt generation ids). Pair divergences
//! are averaged; pair outer products average into the topic co-occurrence
//! matrix. These conventions are echoed in [`SdmReport::conventions`] so
//! serialized reports are self-describing.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::corpus::{EmbeddingSet, RecordMeta, Role};

pub const DEFAULT_ALPHA: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum SdmError {
    #[error("assignment vector has length {got}, corpus has {expected} records")]
    LengthMismatch { expected: usize, got: usize },
    #[error("assignment label {label} is out of range for k = {k}")]
    KMismatch { k: usize, label: usize },
    #[error("distributions have mismatched sizes {p} and {q}")]
    SizeMismatch { p: usize, q: usize },
    #[error("alpha must be finite and non-negative, got {0}")]
    InvalidAlpha(f64),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("selector matches no records")]
    EmptySelection,
    #[error("KL divergence undefined: q[{index}] = 0 but p[{index}] > 0")]
    SupportViolation { index: usize },
    #[error("joint matrix sums to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("no (group, generation) pair has both a prompt side and an answer side")]
    NoPairs,
    #[error("corpus has no {0} records")]
    MissingRole(Role),
}

pub type Result<T> = std::result::Result<T, SdmError>;

/// Conjunctive record filter; `None` fields match everything.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Selector {
    pub role: Option<Role>,
    pub group_id: Option<String>,
    pub generation_id: Option<u32>,
}

impl Selector {
    pub fn role(role: Role) -> Self {
        Selector {
            role: Some(role),
            ..Selector::default()
        }
    }

    fn matches(&self, meta: &RecordMeta) -> bool {
        self.role.is_none_or(|r| r == meta.role)
            && self.group_id.as_ref().is_none_or(|g| *g == meta.group_id)
            && self.generation_id.is_none_or(|g| g == meta.generation_id)
    }
}

/// An alpha-smoothed topic histogram. Probabilities sum to 1, are
/// non-negative, and are strictly positive whenever `alpha > 0`.
/// `support_count` is the number of records behind the histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicDistribution {
    pub probs: Vec<f64>,
    pub alpha: f64,
    pub support_count: usize,
}

fn check_assignments(assignments: &[usize], set: &EmbeddingSet, k: usize, alpha: f64) -> Result<()> {
    if assignments.len() != set.len() {
        return Err(SdmError::LengthMismatch {
            expected: set.len(),
            got: assignments.len(),
        });
    }
    if k < 1 {
        return Err(SdmError::InvalidK);
    }
    if let Some(&label) = assignments.iter().find(|&&a| a >= k) {
        return Err(SdmError::KMismatch { k, label });
    }
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(SdmError::InvalidAlpha(alpha));
    }
    Ok(())
}

fn smoothed(counts: &[usize], total: usize, alpha: f64) -> Vec<f64> {
    let k = counts.len();
    let denom = total as f64 + k as f64 * alpha;
    counts.iter().map(|&c| (c as f64 + alpha) / denom).collect()
}

fn distribution_over(assignments: &[usize], indices: &[usize], k: usize, alpha: f64) -> TopicDistribution {
    let mut counts = vec![0usize; k];
    for &i in indices {
        counts[assignments[i]] += 1;
    }
    TopicDistribution {
        probs: smoothed(&counts, indices.len(), alpha),
        alpha,
        support_count: indices.len(),
    }
}

/// Topic distribution of the records matching `selector`.
pub fn topic_distribution(
    assignments: &[usize],
    set: &EmbeddingSet,
    selector: &Selector,
    k: usize,
    alpha: f64,
) -> Result<TopicDistribution> {
    check_assignments(assignments, set, k, alpha)?;
    let indices: Vec<usize> = (0..set.len()).filter(|&i| selector.matches(set.meta(i))).collect();
    if indices.is_empty() {
        return Err(SdmError::EmptySelection);
    }
    Ok(distribution_over(assignments, &indices, k, alpha))
}

fn h_bits(probs: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in probs {
        if p > 0.0 {
            h -= p * p.log2();
        }
    }
    h
}

/// Shannon entropy in bits; at most log₂ k.
pub fn entropy_bits(dist: &TopicDistribution) -> f64 {
    h_bits(&dist.probs)
}

/// KL(p ‖ q) in bits. Defined only when q covers p's support.
pub fn kl_bits(p: &TopicDistribution, q: &TopicDistribution) -> Result<f64> {
    kl_bits_slices(&p.probs, &q.probs)
}

fn kl_bits_slices(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(SdmError::SizeMismatch { p: p.len(), q: q.len() });
    }
    let mut kl = 0.0;
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(SdmError::SupportViolation { index });
            }
            kl += pi * (pi / qi).log2();
        }
    }
    Ok(kl)
}

/// Jensen–Shannon divergence in bits: always defined, exactly symmetric,
/// and bounded by [0, 1].
pub fn jsd_bits(p: &TopicDistribution, q: &TopicDistribution) -> Result<f64> {
    jsd_bits_slices(&p.probs, &q.probs)
}

fn jsd_bits_slices(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(SdmError::SizeMismatch { p: p.len(), q: q.len() });
    }
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(h_bits(&m) - 0.5 * (h_bits(p) + h_bits(q)))
}

/// Joint prompt/answer topic matrix: the mean over prompt–answer pairs of
/// the outer product of the pair's distributions. Rows index prompt topics,
/// columns answer topics; entries sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceMatrix {
    pub joint: Vec<Vec<f64>>,
    pub pair_count: usize,
}

struct Pairing {
    // per pair: indices of the prompt-side and answer-side records
    pairs: Vec<(Vec<usize>, Vec<usize>)>,
}

fn build_pairing(set: &EmbeddingSet) -> Pairing {
    let mut prompts: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut answers: BTreeMap<(&str, u32), Vec<usize>> = BTreeMap::new();
    for i in 0..set.len() {
        let meta = set.meta(i);
        match meta.role {
            Role::Prompt => prompts.entry(&meta.group_id).or_default().push(i),
            Role::Answer => answers
                .entry((&meta.group_id, meta.generation_id))
                .or_default()
                .push(i),
        }
    }
    let pairs = answers
        .into_iter()
        .filter_map(|((group, _), ans)| prompts.get(group).map(|pr| (pr.clone(), ans)))
        .collect();
    Pairing { pairs }
}

pub fn cooccurrence(
    assignments: &[usize],
    set: &EmbeddingSet,
    k: usize,
    alpha: f64,
) -> Result<CooccurrenceMatrix> {
    check_assignments(assignments, set, k, alpha)?;
    let pairing = build_pairing(set);
    if pairing.pairs.is_empty() {
        return Err(SdmError::NoPairs);
    }
    let mut joint = vec![vec![0.0f64; k]; k];
    for (prompt_idx, answer_idx) in &pairing.pairs {
        let p = distribution_over(assignments, prompt_idx, k, alpha);
        let a = distribution_over(assignments, answer_idx, k, alpha);
        for (row, &pi) in joint.iter_mut().zip(&p.probs) {
            for (cell, &aj) in row.iter_mut().zip(&a.probs) {
                *cell += pi * aj;
            }
        }
    }
    let inv = 1.0 / pairing.pairs.len() as f64;
    for row in joint.iter_mut() {
        for cell in row.iter_mut() {
            *cell *= inv;
        }
    }
    Ok(CooccurrenceMatrix {
        joint,
        pair_count: pairing.pairs.len(),
    })
}

/// Mutual information of a joint matrix, in bits. Non-negative up to float
/// noise: values in [−1e-12, 0] are clamped to zero.
pub fn mutual_info_bits(matrix: &CooccurrenceMatrix) -> Result<f64> {
    let joint = &matrix.joint;
    let sum: f64 = joint.iter().flatten().sum();
    if (sum - 1.0).abs() > 1e-9 || joint.iter().flatten().any(|&v| v < 0.0) {
        return Err(SdmError::NotNormalized { sum });
    }
    let k_rows = joint.len();
    let k_cols = joint.first().map_or(0, |r| r.len());
    let mut row_marginal = vec![0.0; k_rows];
    let mut col_marginal = vec![0.0; k_cols];
    for (r, row) in joint.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            row_marginal[r] += v;
            col_marginal[c] += v;
        }
    }
    let mut mi = 0.0;
    for (r, row) in joint.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v > 0.0 {
                mi += v * (v / (row_marginal[r] * col_marginal[c])).log2();
            }
        }
    }
    if (-1e-12..0.0).contains(&mi) {
        mi = 0.0;
    }
    Ok(mi)
}

/// Names the approximation choices baked into a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub global_scope: String,
    pub pairing: String,
    pub ensemble_scope: String,
    pub cooccurrence: String,
    pub averaged_mi: String,
    pub units: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            global_scope: "global metrics compare the pooled prompt distribution with the pooled answer distribution".into(),
            pairing: "a pair is a distinct (group_id, generation_id) among answer records; its prompt side pools the prompt records of the same group across generations".into(),
            ensemble_scope: "ensemble divergences average each pair's answer distribution against the pooled prompt distribution".into(),
            cooccurrence: "the joint topic matrix is the mean over pairs of outer(prompt pair distribution, answer pair distribution)".into(),
            averaged_mi: "averaged MI is the mean over pairs of the mutual information of each pair's outer product, which is zero up to float noise by construction".into(),
            units: "entropies and divergences are reported in bits".into(),
        }
    }
}

/// The full divergence suite at one cluster count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdmReport {
    pub h_prompt_bits: f64,
    pub h_answer_bits: f64,
    pub entropy_diff_bits: f64,
    pub global_jsd_bits: f64,
    pub global_kl_pa_bits: f64,
    pub global_kl_ap_bits: f64,
    pub ensemble_jsd_bits: f64,
    pub ensemble_kl_pa_bits: f64,
    pub ensemble_kl_ap_bits: f64,
    pub ensemble_mi_bits: f64,
    pub averaged_mi_bits: f64,
    pub k: usize,
    pub alpha: f64,
    pub conventions: Conventions,
}

pub fn sdm_report(assignments: &[usize], set: &EmbeddingSet, k: usize, alpha: f64) -> Result<SdmReport> {
    check_assignments(assignments, set, k, alpha)?;
    let pooled = |role: Role| -> Result<TopicDistribution> {
        topic_distribution(assignments, set, &Selector::role(role), k, alpha)
            .map_err(|e| match e {
                SdmError::EmptySelection => SdmError::MissingRole(role),
                other => other,
            })
    };
    let prompt = pooled(Role::Prompt)?;
    let answer = pooled(Role::Answer)?;

    let h_prompt_bits = entropy_bits(&prompt);
    let h_answer_bits = entropy_bits(&answer);

    let pairing = build_pairing(set);
    if pairing.pairs.is_empty() {
        return Err(SdmError::NoPairs);
    }
    let n_pairs = pairing.pairs.len() as f64;
    let mut joint = vec![vec![0.0f64; k]; k];
    let (mut jsd_sum, mut kl_pa_sum, mut kl_ap_sum, mut pair_mi_sum) = (0.0, 0.0, 0.0, 0.0);
    for (prompt_idx, answer_idx) in &pairing.pairs {
        let pair_prompt = distribution_over(assignments, prompt_idx, k, alpha);
        let pair_answer = distribution_over(assignments, answer_idx, k, alpha);
        jsd_sum += jsd_bits_slices(&prompt.probs, &pair_answer.probs)?;
        kl_pa_sum += kl_bits_slices(&prompt.probs, &pair_answer.probs)?;
        kl_ap_sum += kl_bits_slices(&pair_answer.probs, &prompt.probs)?;

        let mut outer = vec![vec![0.0f64; k]; k];
        for (r, &pi) in pair_prompt.probs.iter().enumerate() {
            for (c, &aj) in pair_answer.probs.iter().enumerate() {
                outer[r][c] = pi * aj;
                joint[r][c] += pi * aj;
            }
        }
        pair_mi_sum += mutual_info_bits(&CooccurrenceMatrix {
            joint: outer,
            pair_count: 1,
        })?;
    }
    for row in joint.iter_mut() {
        for cell in row.iter_mut() {
            *cell /= n_pairs;
        }
    }
    let ensemble_mi_bits = mutual_info_bits(&CooccurrenceMatrix {
        joint,
        pair_count: pairing.pairs.len(),
    })?;

    Ok(SdmReport {
        h_prompt_bits,
        h_answer_bits,
        entropy_diff_bits: h_answer_bits - h_prompt_bits,
        global_jsd_bits: jsd_bits(&prompt, &answer)?,
        global_kl_pa_bits: kl_bits(&prompt, &answer)?,
        global_kl_ap_bits: kl_bits(&answer, &prompt)?,
        ensemble_jsd_bits: jsd_sum / n_pairs,
        ensemble_kl_pa_bits: kl_pa_sum / n_pairs,
        ensemble_kl_ap_bits: kl_ap_sum / n_pairs,
        ensemble_mi_bits,
        averaged_mi_bits: pair_mi_sum / n_pairs,
        k,
        alpha,
        conventions: Conventions::default(),
    })
}

//! Corpus ingestion and corpus-level pairwise statistics.
//!
//! A corpus is UTF-8 text with one self-describing JSON record per line.
//! Lines that are empty or start with `#` are skipped. Every record carries
//! a unique `id`, a `role` (`prompt` or `answer`), a `group_id` tying answers
//! to the prompt variant that produced them, an optional integer
//! `generation_id` (default 0), optional `text`, and an `embedding` vector.
//! All records in one corpus must share the embedding dimension.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: record `{id}` has {got} embedding components, expected {expected}")]
    DimensionMismatch {
        line: usize,
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: record `{id}` has an empty embedding")]
    EmptyEmbedding { line: usize, id: String },
    #[error("line {line}: record `{id}` contains a non-finite embedding component")]
    NonFiniteValue { line: usize, id: String },
    #[error("line {line}: duplicate record id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: unknown role `{role}`, expected `prompt` or `answer`")]
    UnknownRole { line: usize, role: String },
    #[error("corpus must contain at least two records")]
    EmptyCorpus,
    #[error("all embeddings coincide, so pairwise distances carry no information")]
    DegenerateCorpus,
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// Whether a sentence came from the prompt side or the answer side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Prompt,
    Answer,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Prompt => "prompt",
            Role::Answer => "answer",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One embedded sentence as it appears on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub role: Role,
    pub group_id: String,
    #[serde(default)]
    pub generation_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub embedding: Vec<f64>,
}

/// Record fields other than the embedding itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordMeta {
    pub id: String,
    pub role: Role,
    pub group_id: String,
    pub generation_id: u32,
    pub text: Option<String>,
}

/// An immutable, validated corpus: at least two records, all embeddings
/// finite and of one shared dimension, ids unique, input order preserved.
///
/// Vectors are stored row-major in one contiguous buffer so the clustering
/// kernels can stream over them.
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    metas: Vec<RecordMeta>,
    data: Vec<f64>,
    dim: usize,
}

impl EmbeddingSet {
    /// Validates and assembles records kept in the given order. Positions in
    /// error messages are 1-based record ordinals.
    pub fn from_records(records: Vec<EmbeddingRecord>) -> Result<Self> {
        let mut b = SetBuilder::default();
        for (i, rec) in records.into_iter().enumerate() {
            b.push(rec, i + 1)?;
        }
        b.finish()
    }

    pub fn len(&self) -> usize {
        self.metas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metas.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn meta(&self, i: usize) -> &RecordMeta {
        &self.metas[i]
    }

    pub fn metas(&self) -> &[RecordMeta] {
        &self.metas
    }

    pub fn record(&self, i: usize) -> EmbeddingRecord {
        let m = &self.metas[i];
        EmbeddingRecord {
            id: m.id.clone(),
            role: m.role,
            group_id: m.group_id.clone(),
            generation_id: m.generation_id,
            text: m.text.clone(),
            embedding: self.vector(i).to_vec(),
        }
    }

    /// Serializes back to line-delimited JSON; parsing the output yields an
    /// equal set.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for i in 0..self.len() {
            out.push_str(&serde_json::to_string(&self.record(i)).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Default)]
struct SetBuilder {
    metas: Vec<RecordMeta>,
    data: Vec<f64>,
    dim: Option<usize>,
    seen: HashSet<String>,
}

impl SetBuilder {
    fn push(&mut self, rec: EmbeddingRecord, line: usize) -> Result<()> {
        if rec.embedding.is_empty() {
            return Err(CorpusError::EmptyEmbedding { line, id: rec.id });
        }
        let dim = *self.dim.get_or_insert(rec.embedding.len());
        if rec.embedding.len() != dim {
            return Err(CorpusError::DimensionMismatch {
                line,
                id: rec.id,
                expected: dim,
                got: rec.embedding.len(),
            });
        }
        if rec.embedding.iter().any(|v| !v.is_finite()) {
            return Err(CorpusError::NonFiniteValue { line, id: rec.id });
        }
        if !self.seen.insert(rec.id.clone()) {
            return Err(CorpusError::DuplicateId { line, id: rec.id });
        }
        self.metas.push(RecordMeta {
            id: rec.id,
            role: rec.role,
            group_id: rec.group_id,
            generation_id: rec.generation_id,
            text: rec.text,
        });
        self.data.extend_from_slice(&rec.embedding);
        Ok(())
    }

    fn finish(self) -> Result<EmbeddingSet> {
        if self.metas.len() < 2 {
            return Err(CorpusError::EmptyCorpus);
        }
        Ok(EmbeddingSet {
            metas: self.metas,
            data: self.data,
            dim: self.dim.expect("dim set once a record was accepted"),
        })
    }
}

// Mirrors EmbeddingRecord but keeps the role as a string so a bad role is
// reported as UnknownRole rather than a generic parse failure.
#[derive(Deserialize)]
struct RawRecord {
    id: String,
    role: String,
    group_id: String,
    #[serde(default)]
    generation_id: u32,
    #[serde(default)]
    text: Option<String>,
    embedding: Vec<f64>,
}

/// Parses a line-delimited corpus. Single-threaded by design; `line` in
/// errors is the 1-based line number in `input` including skipped lines.
pub fn parse_corpus(input: &str) -> Result<EmbeddingSet> {
    let mut b = SetBuilder::default();
    for (idx, raw_line) in input.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(trimmed).map_err(|e| CorpusError::Parse {
            line,
            msg: e.to_string(),
        })?;
        let role = match raw.role.as_str() {
            "prompt" => Role::Prompt,
            "answer" => Role::Answer,
            other => {
                return Err(CorpusError::UnknownRole {
                    line,
                    role: other.to_string(),
                })
            }
        };
        b.push(
            EmbeddingRecord {
                id: raw.id,
                role,
                group_id: raw.group_id,
                generation_id: raw.generation_id,
                text: raw.text,
                embedding: raw.embedding,
            },
            line,
        )?;
    }
    b.finish()
}

/// Centroid and second-moment summary of a corpus.
///
/// `total_variance` is the mean squared distance to the centroid,
/// (1/N) Σᵢ ‖xᵢ − μ‖². `mean_sq_pair_dist` is the mean over all N² ordered
/// pairs of ‖xᵢ − xⱼ‖², which equals exactly twice the total variance; it is
/// computed through that identity, never through the quadratic double loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseStats {
    pub centroid: Vec<f64>,
    pub total_variance: f64,
    pub mean_sq_pair_dist: f64,
}

pub fn pairwise_stats(set: &EmbeddingSet) -> PairwiseStats {
    let n = set.len();
    let dim = set.dim();
    let mut centroid = vec![0.0; dim];
    for i in 0..n {
        for (c, v) in centroid.iter_mut().zip(set.vector(i)) {
            *c += v;
        }
    }
    for c in centroid.iter_mut() {
        *c /= n as f64;
    }
    let mut total = 0.0;
    for i in 0..n {
        total += crate::math::sq_dist(set.vector(i), &centroid);
    }
    let total_variance = total / n as f64;
    PairwiseStats {
        centroid,
        total_variance,
        mean_sq_pair_dist: 2.0 * total_variance,
    }
}

/// Smoothing scale s² that makes the pairwise-distance cap on the index
/// information, mean_sq_pair_dist / (2s²), equal ln n. With this choice the
/// normalized information of any clustering lands in [0, 1].
pub fn default_smoothing_scale(stats: &PairwiseStats, n: usize) -> Result<f64> {
    if stats.mean_sq_pair_dist <= 0.0 {
        return Err(CorpusError::DegenerateCorpus);
    }
    debug_assert!(n >= 2);
    Ok(stats.mean_sq_pair_dist / (2.0 * (n as f64).ln()))
}

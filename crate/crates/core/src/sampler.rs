//! Corpus relatedness and the temperature-annealed sampling distribution.
//!
//! Relatedness between two corpora is the cosine of their embeddings. The
//! probability of drawing corpus `i` while targeting `t` is a softmax of
//! `T * score(i, t)` over all corpora. At `T = 0` this is uniform
//! (multilingual pretraining); as `T` grows it concentrates on the target
//! (fine-tuning). `T` follows the geometric schedule `T_k = T_0 * a^k`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// Norms below this are treated as degenerate.
pub const MIN_EMBEDDING_NORM: f64 = 1e-12;

/// Cosine similarity clamped to `[-1, 1]`.
///
/// A near-zero vector is an error rather than a silent 0, since a zero score
/// would corrupt rankings.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "cosine similarity",
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    for n in [na, nb] {
        if n.is_nan() || n < MIN_EMBEDDING_NORM {
            return Err(Error::DegenerateEmbedding {
                corpus_id: String::new(),
                norm: n,
            });
        }
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityVector {
    pub scores: Vec<f64>,
    pub target_index: usize,
}

/// Scores of every corpus against the target; the target's own score is
/// exactly 1.
pub fn similarity_vector(e: &EmbeddingMatrix, target_index: usize) -> Result<SimilarityVector> {
    if target_index >= e.len() {
        return Err(Error::validation("target_index", "out of range for embedding matrix"));
    }
    let named = |i: usize, err: Error| match err {
        Error::DegenerateEmbedding { .. } => Error::DegenerateEmbedding {
            corpus_id: e.corpus_ids()[i].clone(),
            norm: norm(e.row(i)),
        },
        other => other,
    };
    let target = e.row(target_index);
    if norm(target) < MIN_EMBEDDING_NORM {
        return Err(named(target_index, Error::DegenerateEmbedding { corpus_id: String::new(), norm: 0.0 }));
    }
    let scores = (0..e.len())
        .map(|i| {
            if i == target_index {
                Ok(1.0)
            } else {
                cosine_similarity(e.row(i), target).map_err(|err| named(i, err))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimilarityVector {
        scores,
        target_index,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingDistribution {
    pub probs: Vec<f64>,
}

impl SamplingDistribution {
    /// Uniform over `n` corpora; identical to `sampling_distribution(_, 0.0)`.
    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    /// All mass on `index`.
    pub fn point(n: usize, index: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Self { probs }
    }
}

/// Max-shifted softmax of `temperature * scores`. Mathematically identical to
/// the unshifted form but cannot overflow for large temperatures.
pub fn sampling_distribution(s: &SimilarityVector, temperature: f64) -> Result<SamplingDistribution> {
    if !temperature.is_finite() || temperature < 0.0 {
        return Err(Error::validation("temperature", format!("{temperature} is not finite and >= 0")));
    }
    if s.scores.is_empty() {
        return Err(Error::validation("scores", "empty similarity vector"));
    }
    let logits: Vec<f64> = s.scores.iter().map(|x| temperature * x).collect();
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(SamplingDistribution {
        probs: weights.into_iter().map(|w| w / z).collect(),
    })
}

/// Geometric annealing: `T_k = t0 * growth^k`, `k = 0, 1, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    pub t0: f64,
    pub growth: f64,
}

impl Default for TemperatureSchedule {
    fn default() -> Self {
        Self {
            t0: 0.01,
            growth: 1.5,
        }
    }
}

impl TemperatureSchedule {
    pub fn new(t0: f64, growth: f64) -> Result<Self> {
        if !t0.is_finite() || t0 < 0.0 {
            return Err(Error::validation("t0", "must be finite and >= 0"));
        }
        if !growth.is_finite() || growth < 1.0 {
            return Err(Error::validation("growth", "must be finite and >= 1"));
        }
        Ok(Self { t0, growth })
    }

    /// Closed form of the recurrence `T_{k+1} = growth * T_k`.
    pub fn temperature_at(&self, epoch: u32) -> f64 {
        self.t0 * self.growth.powi(epoch as i32)
    }
}

/// Inverse-CDF draw over the stored order. Consumes exactly one `f64` from
/// `rng` per call regardless of the distribution.
pub fn sample_corpus<R: Rng + ?Sized>(dist: &SamplingDistribution, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in dist.probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

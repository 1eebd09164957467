use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::rng::{derived_rng, SALT_CORPUS_DRAWS};
use crate::sampler::{
    sample_corpus, sampling_distribution, SamplingDistribution, SimilarityVector, TemperatureSchedule,
};

/// How the per-batch corpus distribution evolves over epochs.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingPlan {
    /// Every corpus equally likely; the zero-temperature limit.
    Uniform { corpora: usize },
    /// Only the target; the infinite-temperature limit.
    TargetOnly { corpora: usize, target: usize },
    /// Softmax of `T_k * score` with `T_k` from the schedule.
    Annealed {
        similarities: SimilarityVector,
        schedule: TemperatureSchedule,
    },
}

impl SamplingPlan {
    pub fn distribution(&self, epoch: u32) -> Result<SamplingDistribution> {
        match self {
            SamplingPlan::Uniform { corpora } => Ok(SamplingDistribution::uniform(*corpora)),
            SamplingPlan::TargetOnly { corpora, target } => Ok(SamplingDistribution::point(*corpora, *target)),
            SamplingPlan::Annealed {
                similarities,
                schedule,
            } => sampling_distribution(similarities, schedule.temperature_at(epoch)),
        }
    }

    /// Temperature in effect at `epoch`; `None` for the target-only plan.
    pub fn temperature(&self, epoch: u32) -> Option<f64> {
        match self {
            SamplingPlan::Uniform { .. } => Some(0.0),
            SamplingPlan::TargetOnly { .. } => None,
            SamplingPlan::Annealed { schedule, .. } => Some(schedule.temperature_at(epoch)),
        }
    }
}

/// Draws one corpus per batch. The generator is derived from the run seed
/// alone, so two plans that yield the same distributions draw the same
/// corpus sequence.
pub struct CorpusScheduler {
    plan: SamplingPlan,
    rng: ChaCha8Rng,
}

impl CorpusScheduler {
    pub fn new(plan: SamplingPlan, seed: u64) -> Self {
        Self {
            plan,
            rng: derived_rng(seed, SALT_CORPUS_DRAWS),
        }
    }

    pub fn plan(&self) -> &SamplingPlan {
        &self.plan
    }

    pub fn draw(&mut self, dist: &SamplingDistribution) -> usize {
        sample_corpus(dist, &mut self.rng)
    }

    /// Corpus indices for `epochs x batches_per_epoch` batches.
    pub fn draw_sequence(&mut self, epochs: u32, batches_per_epoch: usize) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(epochs as usize * batches_per_epoch);
        for k in 0..epochs {
            let dist = self.plan.distribution(k)?;
            for _ in 0..batches_per_epoch {
                out.push(self.draw(&dist));
            }
        }
        Ok(out)
    }
}

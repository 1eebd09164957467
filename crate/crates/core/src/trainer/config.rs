use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::acoustic::{ModelConfig, Sgd};
use crate::error::{Error, Result};
use crate::sampler::TemperatureSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Joint training of the model and the corpus embeddings under uniform
    /// sampling; produces the matrix that CRS similarities come from.
    Embedding,
    Pretrain,
    Finetune,
    Crs,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Embedding => "embedding",
            Strategy::Pretrain => "pretrain",
            Strategy::Finetune => "finetune",
            Strategy::Crs => "crs",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embedding" => Ok(Strategy::Embedding),
            "pretrain" => Ok(Strategy::Pretrain),
            "finetune" => Ok(Strategy::Finetune),
            "crs" => Ok(Strategy::Crs),
            other => Err(Error::validation("strategy", format!("unknown strategy `{other}`"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn default_strategy() -> Strategy {
    Strategy::Pretrain
}
fn default_t0() -> f64 {
    0.01
}
fn default_growth() -> f64 {
    1.5
}
fn default_embed_init_scale() -> f64 {
    0.1
}
fn default_clip_norm() -> f64 {
    5.0
}
fn default_test_fraction() -> f64 {
    0.1
}
fn default_eval_every() -> u32 {
    1
}

/// Settings of one training run. Loaded from a JSON config file; the
/// command line may override `strategy`, `target_corpus_id` and the
/// fine-tune source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRunConfig {
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    /// Defaults to the corpus set's target.
    #[serde(default)]
    pub target_corpus_id: Option<String>,
    pub epochs: u32,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default = "default_t0")]
    pub t0: f64,
    #[serde(default = "default_growth")]
    pub growth: f64,
    pub seed: u64,
    #[serde(default)]
    pub finetune_source_checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "default_embed_init_scale")]
    pub embed_init_scale: f64,
    #[serde(default = "default_clip_norm")]
    pub clip_norm: f64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// CRS only: start from the embedding-phase encoder instead of scratch.
    #[serde(default)]
    pub init_from_embedding_phase: bool,
    /// Held-out target PER is logged every this many epochs (and always
    /// after the last one). 0 logs it only after the last epoch.
    #[serde(default = "default_eval_every")]
    pub eval_every: u32,
}

impl TrainingRunConfig {
    pub fn new(strategy: Strategy, epochs: u32, seed: u64) -> Self {
        Self {
            strategy,
            target_corpus_id: None,
            epochs,
            batches_per_epoch: 20,
            batch_size: 8,
            learning_rate: 0.05,
            t0: default_t0(),
            growth: default_growth(),
            seed,
            finetune_source_checkpoint: None,
            model: ModelConfig::default(),
            embed_init_scale: default_embed_init_scale(),
            clip_norm: default_clip_norm(),
            test_fraction: default_test_fraction(),
            init_from_embedding_phase: false,
            eval_every: default_eval_every(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::validation("epochs", "must be positive"));
        }
        if self.batches_per_epoch == 0 || self.batch_size == 0 {
            return Err(Error::validation("batches_per_epoch/batch_size", "must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::validation("learning_rate", "must be finite and positive"));
        }
        if !(self.test_fraction >= 0.0 && self.test_fraction < 1.0) {
            return Err(Error::validation("test_fraction", "must lie in [0, 1)"));
        }
        if self.clip_norm.is_nan() || self.clip_norm < 0.0 {
            return Err(Error::validation("clip_norm", "must be >= 0"));
        }
        self.schedule()?;
        Ok(())
    }

    pub fn schedule(&self) -> Result<TemperatureSchedule> {
        TemperatureSchedule::new(self.t0, self.growth)
    }

    pub fn optimizer(&self) -> Sgd {
        Sgd {
            learning_rate: self.learning_rate,
            clip_norm: self.clip_norm,
        }
    }
}

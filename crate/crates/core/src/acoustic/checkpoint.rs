//! Versioned JSON checkpoint.
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "strategy": "embedding" | "pretrain" | "finetune" | "crs",
//!   "epoch": <completed epochs>,
//!   "schedule": {"t0": .., "growth": ..},
//!   "target_corpus_id": "..",
//!   "data_seed": .., "seed": ..,
//!   "model": {"layers": .., "hidden_size": ..},
//!   "params": {input_size, hidden_size, layers: [{forward, backward}], heads: {lang: {..}}},
//!   "embeddings": [{"corpus_id": .., "vector": [..]}],
//!   "similarity_fingerprint": null | "<sha256 of the frozen matrix used for CRS scores>"
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{EncoderParams, ModelConfig};
use crate::corpus::store::{read_json, write_json};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::sampler::TemperatureSchedule;
use crate::trainer::Strategy;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub strategy: Strategy,
    pub epoch: u32,
    pub schedule: TemperatureSchedule,
    pub target_corpus_id: String,
    pub data_seed: u64,
    pub seed: u64,
    pub model: ModelConfig,
    pub params: EncoderParams,
    pub embeddings: EmbeddingMatrix,
    pub similarity_fingerprint: Option<String>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt: Self = read_json(path)?;
        if ckpt.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::parse(
                path,
                None,
                format!("checkpoint format_version {} is not supported", ckpt.format_version),
            ));
        }
        if !ckpt.params.is_finite() {
            return Err(Error::numeric(path.display().to_string(), "non-finite parameter"));
        }
        Ok(ckpt)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }
}

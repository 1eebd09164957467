//! Multitask CTC training with corpus relatedness sampling.
//!
//! Each corpus gets a learned embedding that biases its input features. The
//! cosine similarity between embeddings measures how related two corpora
//! are, and a temperature-scaled softmax over those similarities decides
//! which corpus each training batch comes from. Annealing the temperature
//! geometrically moves training from uniform multilingual sampling towards
//! the target corpus alone.
//!
//! Modules:
//! - [`corpus`]: corpora, utterances, the synthetic generator and storage.
//! - [`embedding`]: the corpus embedding matrix and its gradient path.
//! - [`sampler`]: similarities, sampling distributions, temperature schedule.
//! - [`acoustic`]: bidirectional GRU encoder, language heads, CTC, checkpoints.
//! - [`trainer`]: the embedding phase, the three strategies, PER evaluation.
//! - [`report`]: rankings, 2-D projection and strategy comparison tables.

pub mod acoustic;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod linalg;
pub mod report;
mod rng;
pub mod sampler;
pub mod trainer;

pub use acoustic::{Checkpoint, EncoderParams, FrameLogProbs, ModelConfig};
pub use corpus::{read_json, write_json, CorpusSet, SyntheticSpec};
pub use embedding::EmbeddingMatrix;
pub use error::{Error, ErrorClass, Result};
pub use linalg::Matrix;
pub use sampler::{SamplingDistribution, SimilarityVector, TemperatureSchedule};
pub use trainer::{Strategy, TrainingRunConfig};

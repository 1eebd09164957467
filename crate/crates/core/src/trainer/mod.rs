//! Training protocol: the embedding phase, the three sampling strategies and
//! held-out phone error rate.
//!
//! An epoch is a fixed number of batches. Each batch draws one corpus from
//! the current sampling distribution and then `batch_size` training
//! utterances of that corpus uniformly with replacement.

mod config;
mod eval;
mod experiment;
mod runlog;
mod schedule;
mod split;

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::{Strategy, TrainingRunConfig};
pub use eval::{edit_distance, evaluate_per, per_for_indices, EditOps, EvalReport, EvalRow};
pub use experiment::{run_desk_experiment, DeskExperiment, ExperimentConfig, StrategyResult};
pub use runlog::{read_run_log, write_run_log, EpochRecord};
pub use schedule::{CorpusScheduler, SamplingPlan};
pub use split::DataSplit;

use crate::acoustic::{Checkpoint, EncoderParams, CHECKPOINT_FORMAT_VERSION};
use crate::corpus::CorpusSet;
use crate::embedding::{init_embeddings, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, derived_rng, SALT_EMBED_INIT, SALT_MODEL_INIT, SALT_UTTERANCE_DRAWS};
use crate::sampler::similarity_vector;

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochRecord>,
    /// Corpus drawn for each batch, in order.
    pub corpus_draws: Vec<usize>,
    /// `(corpus, utterance)` of every utterance that contributed a gradient.
    pub utterance_draws: Vec<(usize, usize)>,
}

/// Strategy-specific inputs beyond the config.
#[derive(Debug, Clone, Copy, Default)]
pub struct StrategyInputs<'a> {
    /// Frozen embedding matrix that CRS similarities are computed from.
    pub embeddings: Option<&'a EmbeddingMatrix>,
    /// Source checkpoint: required for fine-tuning, optional for CRS with
    /// `init_from_embedding_phase`.
    pub init: Option<&'a Checkpoint>,
}

/// Jointly trains the encoder and the corpus embeddings under uniform
/// sampling. The returned checkpoint's `embeddings` are the matrix CRS
/// similarities are estimated from.
pub fn train_embedding_phase(set: &CorpusSet, config: &TrainingRunConfig) -> Result<TrainOutcome> {
    let mut config = config.clone();
    config.strategy = Strategy::Embedding;
    run_strategy(set, &config, StrategyInputs::default())
}

/// Runs one strategy end to end. Deterministic in `(set, config, inputs)`.
pub fn run_strategy(set: &CorpusSet, config: &TrainingRunConfig, inputs: StrategyInputs<'_>) -> Result<TrainOutcome> {
    config.validate()?;
    let schedule = config.schedule()?;
    let target = match &config.target_corpus_id {
        Some(id) => set.index_of(id)?,
        None => set.target_index(),
    };
    let n = set.len();
    let split = DataSplit::new(set, config.test_fraction)?;

    let (plan, init, frozen) = match config.strategy {
        Strategy::Embedding | Strategy::Pretrain => (SamplingPlan::Uniform { corpora: n }, None, None),
        Strategy::Finetune => {
            let init = inputs.init.ok_or_else(|| {
                Error::validation("finetune_source_checkpoint", "fine-tuning requires a source checkpoint")
            })?;
            (SamplingPlan::TargetOnly { corpora: n, target }, Some(init), None)
        }
        Strategy::Crs => {
            let frozen = inputs
                .embeddings
                .ok_or_else(|| Error::validation("embeddings", "crs requires an embedding matrix"))?;
            frozen.check_aligned(set)?;
            let similarities = similarity_vector(frozen, target)?;
            let init = if config.init_from_embedding_phase {
                Some(inputs.init.ok_or_else(|| {
                    Error::validation("init", "init_from_embedding_phase needs the embedding-phase checkpoint")
                })?)
            } else {
                None
            };
            (SamplingPlan::Annealed { similarities, schedule }, init, Some(frozen))
        }
    };

    let (model, mut params, mut embeddings) = match init {
        Some(ckpt) => {
            if ckpt.data_seed != set.data_seed() {
                return Err(Error::validation(
                    "init checkpoint",
                    format!("trained on data seed {}, corpus set has {}", ckpt.data_seed, set.data_seed()),
                ));
            }
            ckpt.embeddings.check_aligned(set)?;
            (ckpt.model, ckpt.params.clone(), ckpt.embeddings.clone())
        }
        None => {
            let params = EncoderParams::init(
                &config.model,
                set.feature_dim(),
                &set.languages(),
                derive_seed(config.seed, SALT_MODEL_INIT),
            )?;
            let emb = init_embeddings(set, config.embed_init_scale, derive_seed(config.seed, SALT_EMBED_INIT))?;
            (config.model, params, emb)
        }
    };

    let mut scheduler = CorpusScheduler::new(plan, config.seed);
    let mut utt_rng = derived_rng(config.seed, SALT_UTTERANCE_DRAWS);
    let optimizer = config.optimizer();
    let target_id = set.corpora()[target].meta.corpus_id.clone();

    let mut log = Vec::with_capacity(config.epochs as usize);
    let mut corpus_draws = Vec::with_capacity(config.epochs as usize * config.batches_per_epoch);
    let mut utterance_draws = Vec::new();
    for epoch in 0..config.epochs {
        let dist = scheduler.plan().distribution(epoch)?;
        let mut counts = vec![0usize; n];
        let mut loss_sum = 0.0;
        for batch in 0..config.batches_per_epoch {
            let c = scheduler.draw(&dist);
            counts[c] += 1;
            corpus_draws.push(c);
            let picked = draw_batch(&split, c, config.batch_size, &mut utt_rng, set)?;
            utterance_draws.extend(picked.iter().map(|&u| (c, u)));
            let provenance = || format!("epoch {epoch} batch {batch} corpus `{}`", set.corpora()[c].meta.corpus_id);
            let loss = train_batch(set, c, &picked, &mut params, &mut embeddings, &optimizer)
                .map_err(|e| with_provenance(e, &provenance()))?;
            loss_sum += loss;
        }

        let last = epoch + 1 == config.epochs;
        let due = config.eval_every > 0 && (epoch + 1) % config.eval_every == 0;
        let per = if last || due {
            Some(per_for_indices(&params, &embeddings, set, target, split.test(target))?.per)
        } else {
            None
        };
        log.push(EpochRecord {
            strategy: config.strategy,
            target_corpus_id: target_id.clone(),
            data_seed: set.data_seed(),
            seed: config.seed,
            epoch,
            temperature: scheduler.plan().temperature(epoch),
            target_prob: dist.probs[target],
            batch_counts: set.corpus_ids().into_iter().zip(counts).collect::<BTreeMap<_, _>>(),
            mean_train_loss: loss_sum / config.batches_per_epoch as f64,
            target_heldout_per: per,
        });
    }

    let checkpoint = Checkpoint {
        format_version: CHECKPOINT_FORMAT_VERSION,
        strategy: config.strategy,
        epoch: config.epochs,
        schedule,
        target_corpus_id: target_id,
        data_seed: set.data_seed(),
        seed: config.seed,
        model,
        params,
        embeddings,
        similarity_fingerprint: frozen.map(EmbeddingMatrix::fingerprint),
    };
    Ok(TrainOutcome {
        checkpoint,
        log,
        corpus_draws,
        utterance_draws,
    })
}

fn draw_batch(
    split: &DataSplit,
    corpus: usize,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
    set: &CorpusSet,
) -> Result<Vec<usize>> {
    let pool = split.train(corpus);
    if pool.is_empty() {
        return Err(Error::validation(
            format!("corpus `{}`", set.corpora()[corpus].meta.corpus_id),
            "no training utterances after the held-out split",
        ));
    }
    Ok((0..batch_size).map(|_| pool[rng.random_range(0..pool.len())]).collect())
}

/// One SGD step on the mean loss of a single-corpus batch. Per-utterance
/// passes run in parallel; gradients are summed in batch order.
fn train_batch(
    set: &CorpusSet,
    corpus: usize,
    picked: &[usize],
    params: &mut EncoderParams,
    embeddings: &mut EmbeddingMatrix,
    optimizer: &crate::acoustic::Sgd,
) -> Result<f64> {
    let c = &set.corpora()[corpus];
    let lang = &c.meta.language_id;
    let row = embeddings.index_of(&c.meta.corpus_id)?;
    let e = embeddings.row(row);
    let grads: Vec<_> = picked
        .par_iter()
        .map(|&u| {
            let utt = &c.utterances[u];
            params.loss_and_grad(&utt.features, e, &utt.labels, lang)
        })
        .collect::<Result<_>>()?;

    let scale = 1.0 / picked.len() as f64;
    let mut total = params.zeros_like();
    let mut e_grad = vec![0.0; embeddings.dim()];
    let mut loss = 0.0;
    for g in &grads {
        total.add_assign(&g.params);
        for (a, b) in e_grad.iter_mut().zip(&g.embedding) {
            *a += b;
        }
        loss += g.loss;
    }
    total.scale(scale);
    e_grad.iter_mut().for_each(|v| *v *= scale);
    loss *= scale;
    if !loss.is_finite() {
        return Err(Error::numeric("batch loss", format!("{loss}")));
    }
    optimizer.step(params, &total, embeddings, &[(row, e_grad)])?;
    if !params.is_finite() || !embeddings.row(row).iter().all(|v| v.is_finite()) {
        return Err(Error::numeric("parameter update", "non-finite parameter after step"));
    }
    Ok(loss)
}

fn with_provenance(err: Error, at: &str) -> Error {
    match err {
        Error::Numeric { context, reason } => Error::Numeric {
            context: format!("{at}: {context}"),
            reason,
        },
        Error::CtcInfeasible { .. } => Error::Validation {
            field: at.to_string(),
            reason: err.to_string(),
        },
        other => other,
    }
}

//! The full desk-scale protocol on a factorial synthetic collection:
//! embedding phase, relatedness report, projection, then pretrain,
//! fine-tune and CRS on the target with held-out PER for each.

use serde::{Deserialize, Serialize};

use super::{
    evaluate_per, run_strategy, train_embedding_phase, DataSplit, EpochRecord, Strategy, StrategyInputs,
    TrainOutcome, TrainingRunConfig,
};
use crate::corpus::{generate_corpus_set, CorpusSet, FactorialDesign};
use crate::error::Result;
use crate::report::{project_2d, rank_related, Projection2D, RankingReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub design: FactorialDesign,
    /// Template for every run; `strategy`, `epochs` and `seed` are set per run.
    pub run: TrainingRunConfig,
    pub embedding_epochs: u32,
    pub pretrain_epochs: u32,
    pub finetune_epochs: u32,
    /// Defaults to pretrain + fine-tune epochs so all strategies see the
    /// same number of updates.
    pub crs_epochs: u32,
}

impl ExperimentConfig {
    /// Eight corpora (2 languages x 2 domains), default small model.
    pub fn desk() -> Self {
        let mut run = TrainingRunConfig::new(Strategy::Pretrain, 1, 0);
        run.batches_per_epoch = 25;
        run.batch_size = 8;
        run.learning_rate = 0.1;
        run.eval_every = 0;
        Self {
            design: FactorialDesign::eight_corpus(0),
            run,
            embedding_epochs: 20,
            pretrain_epochs: 20,
            finetune_epochs: 12,
            crs_epochs: 32,
        }
    }

    fn run_config(&self, strategy: Strategy, epochs: u32, seed: u64) -> TrainingRunConfig {
        let mut c = self.run.clone();
        c.strategy = strategy;
        c.epochs = epochs;
        c.seed = seed;
        c
    }
}

#[derive(Debug, Clone)]
pub struct StrategyResult {
    pub strategy: Strategy,
    pub target_per: f64,
    pub log: Vec<EpochRecord>,
}

#[derive(Debug, Clone)]
pub struct DeskExperiment {
    pub set: CorpusSet,
    pub embedding_phase: TrainOutcome,
    /// Top-2 related corpora for every corpus as target.
    pub rankings: Vec<RankingReport>,
    pub projection: Projection2D,
    /// Pretrain, fine-tune and CRS, in that order.
    pub results: Vec<StrategyResult>,
}

impl DeskExperiment {
    pub fn per(&self, strategy: Strategy) -> Option<f64> {
        self.results.iter().find(|r| r.strategy == strategy).map(|r| r.target_per)
    }
}

pub fn run_desk_experiment(config: &ExperimentConfig, seed: u64) -> Result<DeskExperiment> {
    let mut design = config.design.clone();
    design.seed = seed;
    let set = generate_corpus_set(&design.to_spec())?;
    let target_id = set.target().meta.corpus_id.clone();
    let split = DataSplit::new(&set, config.run.test_fraction)?;

    let embedding_phase =
        train_embedding_phase(&set, &config.run_config(Strategy::Embedding, config.embedding_epochs, seed))?;
    let frozen = &embedding_phase.checkpoint.embeddings;
    let rankings = (0..set.len())
        .map(|t| rank_related(frozen, t, 2.min(set.len() - 1)))
        .collect::<Result<Vec<_>>>()?;
    let projection = project_2d(frozen)?.tagged(&set)?;

    let pretrain = run_strategy(
        &set,
        &config.run_config(Strategy::Pretrain, config.pretrain_epochs, seed),
        StrategyInputs::default(),
    )?;
    let finetune = run_strategy(
        &set,
        &config.run_config(Strategy::Finetune, config.finetune_epochs, seed),
        StrategyInputs {
            init: Some(&pretrain.checkpoint),
            ..Default::default()
        },
    )?;
    let crs = run_strategy(
        &set,
        &config.run_config(Strategy::Crs, config.crs_epochs, seed),
        StrategyInputs {
            embeddings: Some(frozen),
            init: Some(&embedding_phase.checkpoint),
        },
    )?;

    let results = [pretrain, finetune, crs]
        .into_iter()
        .map(|o| {
            let per = evaluate_per(&o.checkpoint, &set, &split, &target_id)?.rows[0].per;
            Ok(StrategyResult {
                strategy: o.checkpoint.strategy,
                target_per: per,
                log: o.log,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DeskExperiment {
        set,
        embedding_phase,
        rankings,
        projection,
        results,
    })
}

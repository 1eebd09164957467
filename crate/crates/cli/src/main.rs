//! `crs`: data generation, training, evaluation and reports for corpus
//! relatedness sampling.
//!
//! Exit codes: 0 success, 2 validation error, 3 numeric error, 4 I/O error.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crs_core::corpus::{generate_corpus_set, load_corpus_set, save_corpus_set, FactorialDesign};
use crs_core::report::{
    compare_strategies, project_2d, rank_related, write_ranking_csv, write_similarity_csv, RankingReport,
};
use crs_core::sampler::{sampling_distribution, similarity_vector};
use crs_core::trainer::{
    evaluate_per, read_run_log, run_strategy, train_embedding_phase, write_run_log, DataSplit, StrategyInputs,
};
use crs_core::{
    read_json, Checkpoint, EmbeddingMatrix, Error, ErrorClass, Result, Strategy, SyntheticSpec,
    TrainingRunConfig,
};

#[derive(Parser)]
#[command(name = "crs", version, about = "Corpus relatedness sampling for multitask CTC training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus set from a spec file.
    ///
    /// The spec is either a full synthetic spec (explicit languages, domains
    /// and corpora) or a factorial design (counts of languages and domains
    /// with sizes per corpus). `crs template spec|factorial` prints one.
    GenData {
        /// Synthetic spec or factorial design (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Output directory; created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the model and corpus embeddings under uniform sampling.
    TrainEmbed {
        /// Corpus set directory written by `gen-data`.
        #[arg(long)]
        data: PathBuf,
        /// Training run config (JSON); `crs template run` prints one.
        #[arg(long)]
        config: PathBuf,
        /// Embedding matrix for similarity estimation.
        #[arg(long)]
        out_embed: PathBuf,
        /// Embedding-phase checkpoint.
        #[arg(long)]
        out_ckpt: PathBuf,
        /// Optional per-epoch run log (JSON lines).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Similarity of every corpus to the target and the sampling
    /// distribution at a temperature, as `corpus_id,score,prob`.
    Similarity {
        /// Embedding matrix written by `train-embed`.
        #[arg(long)]
        embed: PathBuf,
        /// Target corpus id.
        #[arg(long)]
        target: String,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
        /// Temperature of the sampling softmax.
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
    },
    /// Train one strategy on the target corpus.
    Train {
        /// Corpus set directory written by `gen-data`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        /// Target corpus id.
        #[arg(long)]
        target: String,
        /// Training run config (JSON); `strategy` and `target_corpus_id` are
        /// taken from the command line.
        #[arg(long)]
        config: PathBuf,
        /// Embedding matrix from `train-embed`; required for crs.
        #[arg(long)]
        embed: Option<PathBuf>,
        /// Source checkpoint: the pretrain checkpoint for finetune, or the
        /// embedding-phase checkpoint for crs with `init_from_embedding_phase`.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Output checkpoint.
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch run log (JSON lines).
        #[arg(long)]
        log: PathBuf,
    },
    /// Phone error rate of one corpus under a checkpoint, as CSV.
    Eval {
        /// Checkpoint written by `train` or `train-embed`.
        #[arg(long)]
        ckpt: PathBuf,
        /// Corpus set directory written by `gen-data`.
        #[arg(long)]
        data: PathBuf,
        /// Corpus to score.
        #[arg(long)]
        corpus: String,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
        /// Held-out fraction; must match the training config to score the
        /// same test split.
        #[arg(long, default_value_t = 0.1)]
        test_fraction: f64,
    },
    /// Analysis reports as CSV.
    #[command(subcommand)]
    Report(Report),
    /// Print an example input file to stdout.
    Template {
        #[arg(value_enum)]
        kind: TemplateKind,
    },
}

#[derive(Subcommand)]
enum Report {
    /// Top-k related corpora per target: `target_corpus_id,rank,corpus_id,score`.
    Rank {
        /// Embedding matrix written by `train-embed`.
        #[arg(long)]
        embed: PathBuf,
        /// Restrict to one target; every corpus by default.
        #[arg(long)]
        target: Option<String>,
        /// Corpora listed per target.
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
    /// PCA projection of the embeddings: `corpus_id,language_id,domain_id,x,y`.
    Project {
        /// Embedding matrix written by `train-embed`.
        #[arg(long)]
        embed: PathBuf,
        /// Corpus set providing language and domain tags.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Strategy comparison: `target_corpus_id,pretrain_per,finetune_per,crs_per`
    /// with a final `Average` row.
    Compare {
        /// Run logs written by `train`.
        #[arg(long = "log", required = true, num_args = 1..)]
        logs: Vec<PathBuf>,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Pretrain,
    Finetune,
    Crs,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Pretrain => Strategy::Pretrain,
            StrategyArg::Finetune => Strategy::Finetune,
            StrategyArg::Crs => Strategy::Crs,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TemplateKind {
    /// Full synthetic spec with one language, one domain and one corpus.
    Spec,
    /// The eight-corpus factorial design.
    Factorial,
    /// Training run config.
    Run,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Accepts either a full spec or a factorial design, told apart by whether
/// `languages` is a list or a count.
fn read_spec(path: &Path) -> Result<SyntheticSpec> {
    let value: serde_json::Value = read_json(path)?;
    let parse = |e: serde_json::Error| Error::parse(path, None, e);
    if value.get("languages").is_some_and(|v| v.is_u64()) {
        let design: FactorialDesign = serde_json::from_value(value).map_err(parse)?;
        Ok(design.to_spec())
    } else {
        serde_json::from_value(value).map_err(parse)
    }
}

fn gen_data(spec: &Path, out: &Path) -> Result<()> {
    let set = generate_corpus_set(&read_spec(spec)?)?;
    save_corpus_set(&set, out)?;
    eprintln!("wrote {} corpora to {}", set.len(), out.display());
    Ok(())
}

fn train_embed(data: &Path, config: &Path, out_embed: &Path, out_ckpt: &Path, log: Option<&Path>) -> Result<()> {
    let set = load_corpus_set(data)?;
    let config: TrainingRunConfig = read_json(config)?;
    let out = train_embedding_phase(&set, &config)?;
    out.checkpoint.embeddings.save(out_embed)?;
    out.checkpoint.save(out_ckpt)?;
    if let Some(log) = log {
        write_run_log(log, &out.log)?;
    }
    eprintln!("embedding fingerprint {}", out.checkpoint.embeddings.fingerprint());
    Ok(())
}

fn similarity(embed: &Path, target: &str, out: &Path, temperature: f64) -> Result<()> {
    let e = EmbeddingMatrix::load(embed)?;
    let sims = similarity_vector(&e, e.index_of(target)?)?;
    let dist = sampling_distribution(&sims, temperature)?;
    write_similarity_csv(create(out)?, e.corpus_ids(), &sims, &dist)
}

struct TrainArgs<'a> {
    data: &'a Path,
    strategy: Strategy,
    target: &'a str,
    config: &'a Path,
    embed: Option<&'a Path>,
    init: Option<&'a Path>,
    out: &'a Path,
    log: &'a Path,
}

fn train(a: TrainArgs<'_>) -> Result<()> {
    let set = load_corpus_set(a.data)?;
    let mut config: TrainingRunConfig = read_json(a.config)?;
    config.strategy = a.strategy;
    config.target_corpus_id = Some(a.target.to_string());
    let init_path = a.init.map(Path::to_path_buf).or_else(|| match a.strategy {
        Strategy::Finetune => config.finetune_source_checkpoint.clone(),
        _ => None,
    });
    let init = init_path.as_deref().map(Checkpoint::load).transpose()?;
    let embed = a.embed.map(EmbeddingMatrix::load).transpose()?;
    let inputs = StrategyInputs {
        embeddings: embed.as_ref(),
        init: init.as_ref(),
    };
    let out = run_strategy(&set, &config, inputs)?;
    out.checkpoint.save(a.out)?;
    write_run_log(a.log, &out.log)?;
    if let Some(per) = out.log.last().and_then(|r| r.target_heldout_per) {
        eprintln!("{} on {}: held-out PER {per:.4}", a.strategy, a.target);
    }
    Ok(())
}

fn eval(ckpt: &Path, data: &Path, corpus: &str, out: &Path, test_fraction: f64) -> Result<()> {
    let ckpt = Checkpoint::load(ckpt)?;
    let set = load_corpus_set(data)?;
    if ckpt.data_seed != set.data_seed() {
        return Err(Error::validation(
            "ckpt",
            format!("trained on data seed {}, corpus set has {}", ckpt.data_seed, set.data_seed()),
        ));
    }
    let split = DataSplit::new(&set, test_fraction)?;
    evaluate_per(&ckpt, &set, &split, corpus)?.write_csv(create(out)?)
}

fn report(r: &Report) -> Result<()> {
    match r {
        Report::Rank { embed, target, k, out } => {
            let e = EmbeddingMatrix::load(embed)?;
            let targets: Vec<usize> = match target {
                Some(id) => vec![e.index_of(id)?],
                None => (0..e.len()).collect(),
            };
            let reports = targets
                .into_iter()
                .map(|t| rank_related(&e, t, *k))
                .collect::<Result<Vec<RankingReport>>>()?;
            write_ranking_csv(create(out)?, &reports)
        }
        Report::Project { embed, data, out } => {
            let e = EmbeddingMatrix::load(embed)?;
            let mut p = project_2d(&e)?;
            if let Some(data) = data {
                p = p.tagged(&load_corpus_set(data)?)?;
            }
            p.write_csv(create(out)?)
        }
        Report::Compare { logs, out } => {
            let logs = logs.iter().map(|p| read_run_log(p)).collect::<Result<Vec<_>>>()?;
            compare_strategies(&logs)?.write_csv(create(out)?)
        }
    }
}

fn template(kind: TemplateKind) -> Result<()> {
    let text = match kind {
        TemplateKind::Spec => serde_json::to_string_pretty(&example_spec()),
        TemplateKind::Factorial => serde_json::to_string_pretty(&FactorialDesign::eight_corpus(0)),
        TemplateKind::Run => serde_json::to_string_pretty(&TrainingRunConfig::new(Strategy::Pretrain, 10, 0)),
    }
    .map_err(|e| Error::numeric("template", e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn example_spec() -> SyntheticSpec {
    use crs_core::corpus::{CorpusDef, DomainDef, LanguageDef};
    SyntheticSpec {
        languages: vec![LanguageDef {
            id: "L0".into(),
            alphabet_size: 2,
            transition: vec![vec![0.5, 0.5], vec![0.9, 0.1]],
            emission_means: vec![vec![1.0; 4], vec![-1.0; 4]],
        }],
        domains: vec![DomainDef {
            id: "D0".into(),
            channel_offset: vec![0.0; 4],
            noise_sigma: 0.5,
            min_frames_per_phone: 1,
            max_frames_per_phone: 3,
        }],
        corpora: vec![CorpusDef {
            corpus_id: "c0".into(),
            language_id: "L0".into(),
            domain_id: "D0".into(),
            utterance_count: 20,
            min_label_len: 1,
            max_label_len: 6,
        }],
        feature_dim: 4,
        seed: 0,
        target_index: 0,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { spec, out } => gen_data(&spec, &out),
        Command::TrainEmbed {
            data,
            config,
            out_embed,
            out_ckpt,
            log,
        } => train_embed(&data, &config, &out_embed, &out_ckpt, log.as_deref()),
        Command::Similarity {
            embed,
            target,
            out,
            temperature,
        } => similarity(&embed, &target, &out, temperature),
        Command::Train {
            data,
            strategy,
            target,
            config,
            embed,
            init,
            out,
            log,
        } => train(TrainArgs {
            data: &data,
            strategy: strategy.into(),
            target: &target,
            config: &config,
            embed: embed.as_deref(),
            init: init.as_deref(),
            out: &out,
            log: &log,
        }),
        Command::Eval {
            ckpt,
            data,
            corpus,
            out,
            test_fraction,
        } => eval(&ckpt, &data, &corpus, &out, test_fraction),
        Command::Report(r) => report(&r),
        Command::Template { kind } => template(kind),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Numeric => 3,
                ErrorClass::Io => 4,
            })
        }
    }
}

//! Runs the eight-corpus desk experiment for a few seeds and prints the
//! held-out target PER of each strategy plus the top related corpora.
//!
//! cargo run --release -p crs-core --example desk_experiment -- [seeds] [config.json] [first_seed]
//! cargo run --release -p crs-core --example desk_experiment -- --print-config

use std::time::Instant;

use crs_core::trainer::{run_desk_experiment, ExperimentConfig};
use crs_core::Strategy;

fn main() -> crs_core::Result<()> {
    if std::env::args().nth(1).as_deref() == Some("--print-config") {
        println!("{}", serde_json::to_string_pretty(&ExperimentConfig::desk()).expect("config serializes"));
        return Ok(());
    }
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let config = match std::env::args().nth(2) {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| crs_core::Error::io(&path, e))?;
            serde_json::from_str(&text).map_err(|e| crs_core::Error::parse(&path, None, e.to_string()))?
        }
        None => ExperimentConfig::desk(),
    };
    let mut sums = [0.0; 3];
    let first: u64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(0);
    for seed in first..first + seeds {
        let start = Instant::now();
        let exp = run_desk_experiment(&config, seed)?;
        let pers = [Strategy::Pretrain, Strategy::Finetune, Strategy::Crs].map(|s| exp.per(s).unwrap_or(f64::NAN));
        for (acc, p) in sums.iter_mut().zip(pers) {
            *acc += p;
        }
        let (same, cross) = exp.projection.domain_distances();
        println!(
            "seed {seed}: pretrain {:.4} finetune {:.4} crs {:.4} | same-domain {:.3} cross-domain {:.3} | {:.1}s",
            pers[0],
            pers[1],
            pers[2],
            same.unwrap_or(f64::NAN),
            cross.unwrap_or(f64::NAN),
            start.elapsed().as_secs_f64()
        );
        for r in &exp.rankings {
            let related: Vec<String> = r.related.iter().map(|(id, s)| format!("{id} ({s:.3})")).collect();
            println!("  {} -> {}", r.target_corpus_id, related.join(", "));
        }
        let crs_log = &exp.results[2].log;
        let fracs: Vec<String> = crs_log.iter().map(|r| format!("{:.2}", r.target_prob)).collect();
        println!("  crs target prob by epoch: {}", fracs.join(" "));
    }
    let n = seeds as f64;
    println!(
        "mean: pretrain {:.4} finetune {:.4} crs {:.4}",
        sums[0] / n,
        sums[1] / n,
        sums[2] / n
    );
    Ok(())
}

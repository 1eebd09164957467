use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Strategy;
use crate::error::{Error, Result};

/// One line of the JSON-lines run log, written after every epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub strategy: Strategy,
    pub target_corpus_id: String,
    pub data_seed: u64,
    pub seed: u64,
    pub epoch: u32,
    /// `null` for the target-only (fine-tune) plan.
    pub temperature: Option<f64>,
    /// Probability of drawing the target corpus this epoch.
    pub target_prob: f64,
    pub batch_counts: BTreeMap<String, usize>,
    pub mean_train_loss: f64,
    pub target_heldout_per: Option<f64>,
}

pub fn write_run_log(path: &Path, records: &[EpochRecord]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut w, rec).map_err(|e| Error::parse(path, None, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_run_log(path: &Path) -> Result<Vec<EpochRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, Some(i + 1), e))?);
    }
    if out.is_empty() {
        return Err(Error::parse(path, None, "run log has no records"));
    }
    Ok(out)
}

//! On-disk layout of a corpus set:
//!
//! ```text
//! <dir>/meta.json          {format_version, target_index, spec, corpora: [{corpus_id,
//!                            language_id, domain_id, phone_alphabet,
//!                            utterance_count, records}]}
//! <dir>/corpus_<i>.jsonl   one record per line:
//!                            {"frames":F,"feature_dim":D,"features":[F*D row-major],"labels":[..]}
//! ```
//!
//! Floats are written in shortest round-trip form, so a load reproduces the
//! saved values bit for bit.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusMeta, CorpusSet, SyntheticSpec, Utterance};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const FORMAT_VERSION: u32 = 1;
const META_FILE: &str = "meta.json";

#[derive(Serialize, Deserialize)]
struct MetaFile {
    format_version: u32,
    target_index: usize,
    spec: Option<SyntheticSpec>,
    corpora: Vec<MetaEntry>,
}

#[derive(Serialize, Deserialize)]
struct MetaEntry {
    #[serde(flatten)]
    meta: CorpusMeta,
    records: String,
}

#[derive(Serialize, Deserialize)]
struct Record {
    frames: usize,
    feature_dim: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

pub fn save_corpus_set(set: &CorpusSet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(set.len());
    for (i, corpus) in set.corpora().iter().enumerate() {
        let name = format!("corpus_{i:03}.jsonl");
        let path = dir.join(&name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        for utt in &corpus.utterances {
            let rec = Record {
                frames: utt.frames(),
                feature_dim: utt.features.cols(),
                features: utt.features.as_slice().to_vec(),
                labels: utt.labels.clone(),
            };
            serde_json::to_writer(&mut w, &rec).map_err(|e| Error::parse(&path, None, e))?;
            w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        entries.push(MetaEntry {
            meta: corpus.meta.clone(),
            records: name,
        });
    }
    let meta = MetaFile {
        format_version: FORMAT_VERSION,
        target_index: set.target_index(),
        spec: set.spec().cloned(),
        corpora: entries,
    };
    write_json(&dir.join(META_FILE), &meta)
}

pub fn load_corpus_set(dir: &Path) -> Result<CorpusSet> {
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: MetaFile = serde_json::from_str(&text)
        .map_err(|e| Error::parse(&meta_path, Some(e.line()), e))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::parse(
            &meta_path,
            None,
            format!(
                "format_version {} is not supported (expected {FORMAT_VERSION})",
                meta.format_version
            ),
        ));
    }
    let mut corpora = Vec::with_capacity(meta.corpora.len());
    for entry in meta.corpora {
        let path = dir.join(&entry.records);
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut utterances = Vec::with_capacity(entry.meta.utterance_count);
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            let lineno = i + 1;
            let rec: Record =
                serde_json::from_str(&line).map_err(|e| Error::parse(&path, Some(lineno), e))?;
            let features = Matrix::from_vec(rec.frames, rec.feature_dim, rec.features)
                .map_err(|e| Error::parse(&path, Some(lineno), e))?;
            utterances.push(Utterance {
                features,
                labels: rec.labels,
            });
        }
        if utterances.len() != entry.meta.utterance_count {
            return Err(Error::parse(
                &path,
                None,
                format!(
                    "expected {} records, found {}",
                    entry.meta.utterance_count,
                    utterances.len()
                ),
            ));
        }
        corpora.push(Corpus {
            meta: entry.meta,
            utterances,
        });
    }
    CorpusSet::new(corpora, meta.target_index, meta.spec)
}

/// Pretty-printed JSON with a trailing newline; parent directories are
/// created as needed.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::parse(path, None, e))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parse errors carry the offending line.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, Some(e.line()), e))
}

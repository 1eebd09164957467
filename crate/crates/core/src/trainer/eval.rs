//! Phone error rate: Levenshtein alignment of greedy decodes against the
//! reference labels.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::DataSplit;
use crate::acoustic::{greedy_decode, Checkpoint, EncoderParams};
use crate::corpus::CorpusSet;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Minimal unit-cost edit count and its decomposition, from the reference's
/// point of view: a deletion is a reference symbol missing from the
/// hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EditOps {
    pub distance: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

pub fn edit_distance<T: PartialEq>(hyp: &[T], reference: &[T]) -> EditOps {
    let (n, m) = (reference.len(), hyp.len());
    let w = m + 1;
    let mut dp = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        dp[i * w] = i;
    }
    for (j, cell) in dp[..w].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = dp[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            let del = dp[(i - 1) * w + j] + 1;
            let ins = dp[i * w + j - 1] + 1;
            dp[i * w + j] = sub.min(del).min(ins);
        }
    }

    // Backtrace preferring match/substitution, then deletion, then insertion.
    let mut ops = EditOps {
        distance: dp[n * w + m],
        ..EditOps::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dp[i * w + j];
        if i > 0 && j > 0 {
            let diff = usize::from(reference[i - 1] != hyp[j - 1]);
            if here == dp[(i - 1) * w + j - 1] + diff {
                ops.substitutions += diff;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && here == dp[(i - 1) * w + j] + 1 {
            ops.deletions += 1;
            i -= 1;
        } else {
            ops.insertions += 1;
            j -= 1;
        }
    }
    ops
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub corpus_id: String,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub errors: usize,
    pub reference_phones: usize,
    pub per: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    /// CSV with header
    /// `corpus_id,substitutions,deletions,insertions,errors,reference_phones,per`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::numeric("csv", e.to_string()))
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::numeric("csv output", e.to_string())
}

/// PER of one corpus over the given utterance indices.
pub fn per_for_indices(
    params: &EncoderParams,
    embeddings: &EmbeddingMatrix,
    set: &CorpusSet,
    corpus_index: usize,
    indices: &[usize],
) -> Result<EvalRow> {
    let corpus = &set.corpora()[corpus_index];
    let meta = &corpus.meta;
    params.head(&meta.language_id)?;
    let row = embeddings.row(embeddings.index_of(&meta.corpus_id)?);
    let ops: Vec<(EditOps, usize)> = indices
        .par_iter()
        .map(|&u| {
            let utt = &corpus.utterances[u];
            let lp = params.log_probs(&utt.features, row, &meta.language_id)?;
            let hyp = greedy_decode(&lp);
            Ok((edit_distance(&hyp, &utt.labels), utt.labels.len()))
        })
        .collect::<Result<_>>()?;
    Ok(row_from_ops(&meta.corpus_id, &ops))
}

pub(crate) fn row_from_ops(corpus_id: &str, ops: &[(EditOps, usize)]) -> EvalRow {
    let mut row = EvalRow {
        corpus_id: corpus_id.to_string(),
        substitutions: 0,
        deletions: 0,
        insertions: 0,
        errors: 0,
        reference_phones: 0,
        per: 0.0,
    };
    for (op, len) in ops {
        row.substitutions += op.substitutions;
        row.deletions += op.deletions;
        row.insertions += op.insertions;
        row.errors += op.distance;
        row.reference_phones += len;
    }
    row.per = if row.reference_phones == 0 {
        0.0
    } else {
        row.errors as f64 / row.reference_phones as f64
    };
    row
}

/// Held-out PER of `corpus_id` under `checkpoint`.
pub fn evaluate_per(
    checkpoint: &Checkpoint,
    set: &CorpusSet,
    split: &DataSplit,
    corpus_id: &str,
) -> Result<EvalReport> {
    let ci = set.index_of(corpus_id)?;
    let row = per_for_indices(&checkpoint.params, &checkpoint.embeddings, set, ci, split.test(ci))?;
    Ok(EvalReport { rows: vec![row] })
}

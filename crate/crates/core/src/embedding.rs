//! Corpus embeddings: one learnable vector per corpus, added to every input
//! frame of that corpus's utterances before encoding.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::store::{read_json, write_json};
use crate::corpus::CorpusSet;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    corpus_ids: Vec<String>,
    rows: Vec<Vec<f64>>,
}

/// One entry of the JSON export.
#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingEntry {
    corpus_id: String,
    vector: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(corpus_ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if corpus_ids.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                context: "embedding rows vs corpus ids",
                expected: corpus_ids.len(),
                actual: rows.len(),
            });
        }
        let dim = rows.first().map_or(0, Vec::len);
        for (id, row) in corpus_ids.iter().zip(&rows) {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "embedding row",
                    expected: dim,
                    actual: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric(format!("embedding `{id}`"), "non-finite entry"));
            }
        }
        let mut sorted: Vec<&String> = corpus_ids.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::validation("corpus_id", format!("duplicate `{}`", w[0])));
        }
        Ok(Self { corpus_ids, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn corpus_ids(&self) -> &[String] {
        &self.corpus_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.rows[i]
    }

    pub fn index_of(&self, corpus_id: &str) -> Result<usize> {
        self.corpus_ids
            .iter()
            .position(|c| c == corpus_id)
            .ok_or_else(|| Error::Unknown {
                kind: "corpus",
                id: corpus_id.to_string(),
            })
    }

    /// Checks that this matrix has one row per corpus of `set`, in order.
    pub fn check_aligned(&self, set: &CorpusSet) -> Result<()> {
        if self.corpus_ids != set.corpus_ids() {
            return Err(Error::validation(
                "embedding corpus_ids",
                "do not match the corpus set (order and ids must agree)",
            ));
        }
        if self.dim() != set.feature_dim() {
            return Err(Error::DimensionMismatch {
                context: "embedding dimension vs feature_dim",
                expected: set.feature_dim(),
                actual: self.dim(),
            });
        }
        Ok(())
    }

    /// SHA-256 over ids and the raw bit patterns of every entry.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (id, row) in self.corpus_ids.iter().zip(&self.rows) {
            h.update(id.as_bytes());
            h.update([0u8]);
            for v in row {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.entries()).map_err(|e| Error::numeric("embedding export", e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, &self.entries())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let entries: Vec<EmbeddingEntry> = read_json(path)?;
        let (ids, rows) = entries.into_iter().map(|e| (e.corpus_id, e.vector)).unzip();
        Self::new(ids, rows)
    }

    fn entries(&self) -> Vec<EmbeddingEntry> {
        self.corpus_ids
            .iter()
            .zip(&self.rows)
            .map(|(id, v)| EmbeddingEntry {
                corpus_id: id.clone(),
                vector: v.clone(),
            })
            .collect()
    }
}

// Serialized inline (as the JSON export layout) inside checkpoints.
impl Serialize for EmbeddingMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries().serialize(s)
    }
}

impl<'de> Deserialize<'de> for EmbeddingMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<EmbeddingEntry>::deserialize(d)?;
        let (ids, rows) = entries.into_iter().map(|e| (e.corpus_id, e.vector)).unzip();
        Self::new(ids, rows).map_err(serde::de::Error::custom)
    }
}

/// Entries i.i.d. uniform in `[-init_scale, init_scale]`, one row per corpus,
/// dimension equal to the feature dimension.
pub fn init_embeddings(set: &CorpusSet, init_scale: f64, seed: u64) -> Result<EmbeddingMatrix> {
    if !init_scale.is_finite() || init_scale < 0.0 {
        return Err(Error::validation("init_scale", "must be finite and >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = set.feature_dim();
    let rows = (0..set.len())
        .map(|_| {
            (0..dim)
                .map(|_| {
                    if init_scale == 0.0 {
                        0.0
                    } else {
                        rng.random_range(-init_scale..=init_scale)
                    }
                })
                .collect()
        })
        .collect();
    EmbeddingMatrix::new(set.corpus_ids(), rows)
}

/// `x_t + e` for every frame `t`.
pub fn bias_features(x: &Matrix, e: &[f64]) -> Result<Matrix> {
    if e.len() != x.cols() {
        return Err(Error::DimensionMismatch {
            context: "embedding vs feature_dim",
            expected: x.cols(),
            actual: e.len(),
        });
    }
    let mut out = x.clone();
    for t in 0..out.rows() {
        for (v, b) in out.row_mut(t).iter_mut().zip(e) {
            *v += b;
        }
    }
    Ok(out)
}

/// Gradient with respect to the embedding row: each frame adds `e` once, so
/// it is the column sum of the upstream gradient.
pub fn embedding_gradient(upstream: &Matrix, dim: usize) -> Result<Vec<f64>> {
    if upstream.cols() != dim {
        return Err(Error::DimensionMismatch {
            context: "upstream gradient width",
            expected: dim,
            actual: upstream.cols(),
        });
    }
    let mut g = vec![0.0; dim];
    for row in upstream.iter_rows() {
        for (gi, v) in g.iter_mut().zip(row) {
            *gi += v;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus_set, FactorialDesign};
    use proptest::prelude::*;

    fn set() -> CorpusSet {
        let mut d = FactorialDesign::eight_corpus(1);
        d.corpora = vec![(0, 0, 2), (0, 1, 2), (1, 0, 2), (1, 1, 2)];
        generate_corpus_set(&d.to_spec()).unwrap()
    }

    #[test]
    fn zero_scale_gives_zero_matrix() {
        let e = init_embeddings(&set(), 0.0, 5).unwrap();
        assert!(e.rows().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn init_is_seeded_and_in_range() {
        let s = set();
        let a = init_embeddings(&s, 0.1, 5).unwrap();
        assert_eq!(a, init_embeddings(&s, 0.1, 5).unwrap());
        assert_ne!(a, init_embeddings(&s, 0.1, 6).unwrap());
        assert_eq!((a.len(), a.dim()), (4, 8));
        assert!(a.rows().iter().flatten().all(|v| (-0.1..=0.1).contains(v)));
        assert!(init_embeddings(&s, -1.0, 5).is_err());
    }

    #[test]
    fn bias_examples() {
        let x = Matrix::from_rows(&[vec![0.5, -0.5]]).unwrap();
        let y = bias_features(&x, &[0.1, 0.2]).unwrap();
        assert!((y.get(0, 0) - 0.6).abs() < 1e-15 && (y.get(0, 1) + 0.3).abs() < 1e-15);
        assert_eq!(bias_features(&x, &[0.0, 0.0]).unwrap(), x);

        let x3 = Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]]).unwrap();
        let y3 = bias_features(&x3, &[1.0, 1.0]).unwrap();
        assert_eq!(y3.rows(), 3);
        for t in 0..3 {
            assert_eq!(y3.get(t, 0), x3.get(t, 0) + 1.0);
            assert_eq!(y3.get(t, 1), x3.get(t, 1) + 1.0);
        }
        assert!(bias_features(&x3, &[1.0]).is_err());
    }

    #[test]
    fn gradient_is_column_sum() {
        let up = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(embedding_gradient(&up, 2).unwrap(), vec![3.0, 3.0]);
        assert_eq!(embedding_gradient(&Matrix::zeros(4, 2), 2).unwrap(), vec![0.0, 0.0]);
        assert!(embedding_gradient(&up, 3).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let e = init_embeddings(&set(), 0.1, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.json");
        e.save(&path).unwrap();
        let back = EmbeddingMatrix::load(&path).unwrap();
        assert_eq!(back.fingerprint(), e.fingerprint());
        assert!(e.to_json().unwrap().contains("\"corpus_id\": \"L0-D0-a\""));
    }

    proptest! {
        #[test]
        fn bias_is_additive(
            rows in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 1..6),
            e1 in proptest::collection::vec(-1.0f64..1.0, 3),
            e2 in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let x = Matrix::from_rows(&rows).unwrap();
            let sum: Vec<f64> = e1.iter().zip(&e2).map(|(a, b)| a + b).collect();
            let once = bias_features(&x, &sum).unwrap();
            let twice = bias_features(&bias_features(&x, &e1).unwrap(), &e2).unwrap();
            for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

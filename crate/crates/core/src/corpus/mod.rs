//! Corpora, utterances and the synthetic multilingual/multidomain generator.

pub(crate) mod store;
mod synth;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use store::{load_corpus_set, read_json, save_corpus_set, write_json, FORMAT_VERSION as CORPUS_FORMAT_VERSION};
pub use synth::{
    generate_corpus_set, CorpusDef, DomainDef, FactorialDesign, LanguageDef, SyntheticSpec,
};

/// Metadata of one corpus. `phone_alphabet` excludes the CTC blank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub corpus_id: String,
    pub language_id: String,
    pub domain_id: String,
    pub phone_alphabet: Vec<String>,
    pub utterance_count: usize,
}

/// One labeled sequence: `frames x feature_dim` features and phone indices
/// into the owning corpus's alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub features: Matrix,
    pub labels: Vec<usize>,
}

impl Utterance {
    pub fn frames(&self) -> usize {
        self.features.rows()
    }

    /// Number of positions where a label equals its predecessor.
    pub fn adjacent_repeats(&self) -> usize {
        adjacent_repeats(&self.labels)
    }
}

pub(crate) fn adjacent_repeats(labels: &[usize]) -> usize {
    labels.windows(2).filter(|w| w[0] == w[1]).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub meta: CorpusMeta,
    pub utterances: Vec<Utterance>,
}

/// The training collection together with the designated target corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSet {
    corpora: Vec<Corpus>,
    target_index: usize,
    spec: Option<SyntheticSpec>,
}

impl CorpusSet {
    /// Validates every corpus and set-level invariant.
    pub fn new(corpora: Vec<Corpus>, target_index: usize, spec: Option<SyntheticSpec>) -> Result<Self> {
        if corpora.is_empty() {
            return Err(Error::validation("corpora", "a corpus set needs at least one corpus"));
        }
        if target_index >= corpora.len() {
            return Err(Error::validation(
                "target_index",
                format!("{target_index} is out of range for {} corpora", corpora.len()),
            ));
        }
        let mut seen = HashSet::new();
        let mut alphabets: BTreeMap<&str, &[String]> = BTreeMap::new();
        let feature_dim = corpora
            .iter()
            .flat_map(|c| c.utterances.first())
            .map(|u| u.features.cols())
            .next();
        for (ci, corpus) in corpora.iter().enumerate() {
            let meta = &corpus.meta;
            if !seen.insert(meta.corpus_id.as_str()) {
                return Err(Error::validation(
                    format!("corpora[{ci}].corpus_id"),
                    format!("duplicate corpus_id `{}`", meta.corpus_id),
                ));
            }
            if meta.phone_alphabet.is_empty() {
                return Err(Error::validation(
                    format!("corpora[{ci}].phone_alphabet"),
                    "alphabet must be nonempty",
                ));
            }
            match alphabets.get(meta.language_id.as_str()) {
                Some(prev) if *prev != meta.phone_alphabet.as_slice() => {
                    return Err(Error::validation(
                        format!("corpora[{ci}].phone_alphabet"),
                        format!("differs from another corpus of language `{}`", meta.language_id),
                    ))
                }
                Some(_) => {}
                None => {
                    alphabets.insert(&meta.language_id, &meta.phone_alphabet);
                }
            }
            if meta.utterance_count != corpus.utterances.len() {
                return Err(Error::validation(
                    format!("corpora[{ci}].utterance_count"),
                    format!(
                        "declares {} utterances but holds {}",
                        meta.utterance_count,
                        corpus.utterances.len()
                    ),
                ));
            }
            for (ui, utt) in corpus.utterances.iter().enumerate() {
                let field = || format!("corpora[{ci}].utterances[{ui}]");
                if utt.frames() == 0 || utt.labels.is_empty() {
                    return Err(Error::validation(field(), "frames and labels must be nonempty"));
                }
                if utt.labels.len() > utt.frames() {
                    return Err(Error::validation(field(), "more labels than frames"));
                }
                if Some(utt.features.cols()) != feature_dim {
                    return Err(Error::validation(field(), "feature_dim differs across utterances"));
                }
                if !utt.features.is_finite() {
                    return Err(Error::validation(field(), "non-finite feature value"));
                }
                if let Some(&bad) = utt.labels.iter().find(|&&l| l >= meta.phone_alphabet.len()) {
                    return Err(Error::validation(
                        field(),
                        format!("label {bad} outside alphabet of size {}", meta.phone_alphabet.len()),
                    ));
                }
            }
        }
        Ok(Self {
            corpora,
            target_index,
            spec,
        })
    }

    pub fn corpora(&self) -> &[Corpus] {
        &self.corpora
    }

    pub fn len(&self) -> usize {
        self.corpora.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corpora.is_empty()
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    pub fn target(&self) -> &Corpus {
        &self.corpora[self.target_index]
    }

    pub fn spec(&self) -> Option<&SyntheticSpec> {
        self.spec.as_ref()
    }

    /// Seed the data was generated from; 0 for hand-assembled sets.
    pub fn data_seed(&self) -> u64 {
        self.spec.as_ref().map_or(0, |s| s.seed)
    }

    pub fn feature_dim(&self) -> usize {
        self.corpora
            .iter()
            .flat_map(|c| c.utterances.first())
            .map(|u| u.features.cols())
            .next()
            .unwrap_or(0)
    }

    pub fn corpus_ids(&self) -> Vec<String> {
        self.corpora.iter().map(|c| c.meta.corpus_id.clone()).collect()
    }

    pub fn index_of(&self, corpus_id: &str) -> Result<usize> {
        self.corpora
            .iter()
            .position(|c| c.meta.corpus_id == corpus_id)
            .ok_or_else(|| Error::Unknown {
                kind: "corpus",
                id: corpus_id.to_string(),
            })
    }

    /// Same data with a different target corpus.
    pub fn with_target(mut self, corpus_id: &str) -> Result<Self> {
        self.target_index = self.index_of(corpus_id)?;
        Ok(self)
    }

    /// Alphabet size (blank excluded) per language, ordered by language id.
    pub fn languages(&self) -> BTreeMap<String, usize> {
        self.corpora
            .iter()
            .map(|c| (c.meta.language_id.clone(), c.meta.phone_alphabet.len()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(id: &str, lang: &str, alphabet: &[&str], utts: Vec<Utterance>) -> Corpus {
        Corpus {
            meta: CorpusMeta {
                corpus_id: id.into(),
                language_id: lang.into(),
                domain_id: "d".into(),
                phone_alphabet: alphabet.iter().map(|s| s.to_string()).collect(),
                utterance_count: utts.len(),
            },
            utterances: utts,
        }
    }

    fn utt(frames: usize, labels: Vec<usize>) -> Utterance {
        Utterance {
            features: Matrix::zeros(frames, 2),
            labels,
        }
    }

    #[test]
    fn rejects_duplicate_ids() {
        let a = corpus("a", "l", &["x"], vec![utt(2, vec![0])]);
        let err = CorpusSet::new(vec![a.clone(), a], 0, None).unwrap_err();
        assert!(err.to_string().contains("duplicate corpus_id"), "{err}");
    }

    #[test]
    fn rejects_diverging_alphabets_within_language() {
        let a = corpus("a", "l", &["x"], vec![utt(2, vec![0])]);
        let b = corpus("b", "l", &["y"], vec![utt(2, vec![0])]);
        assert!(CorpusSet::new(vec![a, b], 0, None).is_err());
    }

    #[test]
    fn rejects_more_labels_than_frames_and_bad_target() {
        let a = corpus("a", "l", &["x"], vec![utt(1, vec![0, 0])]);
        assert!(CorpusSet::new(vec![a], 0, None).is_err());
        let b = corpus("b", "l", &["x"], vec![utt(2, vec![0])]);
        assert!(CorpusSet::new(vec![b], 1, None).is_err());
    }

    #[test]
    fn retargeting_by_id() {
        let a = corpus("a", "l", &["x"], vec![utt(2, vec![0])]);
        let b = corpus("b", "m", &["y"], vec![utt(2, vec![0])]);
        let set = CorpusSet::new(vec![a, b], 0, None).unwrap().with_target("b").unwrap();
        assert_eq!(set.target_index(), 1);
        assert!(set.clone().with_target("zzz").is_err());
        assert_eq!(set.languages().len(), 2);
    }
}

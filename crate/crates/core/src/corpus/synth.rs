//! Deterministic synthetic corpora with controllable language and domain
//! factors.
//!
//! Each language is a first-order Markov chain over its own phone alphabet
//! with one emission mean per phone. Each domain adds a fixed channel offset,
//! isotropic Gaussian noise and a frames-per-phone duration range. A frame of
//! phone `p` in domain `d` is `mean[p] + offset[d] + sigma[d] * N(0, I)`.
//!
//! Whenever a label repeats its predecessor, one gap frame (`offset[d]` plus
//! noise, no phone mean) is inserted between the two segments so every
//! utterance satisfies the CTC feasibility bound `frames >= labels + repeats`.
//!
//! Stream splitting: corpus `i` draws from `ChaCha8Rng::seed_from_u64(seed)`
//! with `set_stream(i)`, so corpora can be generated in parallel and the
//! result does not depend on thread scheduling.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusMeta, CorpusSet, Utterance};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageDef {
    pub id: String,
    pub alphabet_size: usize,
    /// Row-stochastic `alphabet_size x alphabet_size` phone transition matrix.
    pub transition: Vec<Vec<f64>>,
    /// `alphabet_size x feature_dim` emission means.
    pub emission_means: Vec<Vec<f64>>,
}

impl LanguageDef {
    pub fn phone_alphabet(&self) -> Vec<String> {
        (0..self.alphabet_size).map(|p| format!("{}_p{p}", self.id)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDef {
    pub id: String,
    pub channel_offset: Vec<f64>,
    pub noise_sigma: f64,
    pub min_frames_per_phone: usize,
    pub max_frames_per_phone: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDef {
    pub corpus_id: String,
    pub language_id: String,
    pub domain_id: String,
    pub utterance_count: usize,
    pub min_label_len: usize,
    pub max_label_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub languages: Vec<LanguageDef>,
    pub domains: Vec<DomainDef>,
    pub corpora: Vec<CorpusDef>,
    pub feature_dim: usize,
    pub seed: u64,
    /// Index into `corpora` of the default target corpus.
    #[serde(default)]
    pub target_index: usize,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::validation("feature_dim", "must be positive"));
        }
        if self.corpora.is_empty() {
            return Err(Error::validation("corpora", "at least one corpus is required"));
        }
        if self.target_index >= self.corpora.len() {
            return Err(Error::validation("target_index", "out of range"));
        }
        let mut ids = HashSet::new();
        for (li, lang) in self.languages.iter().enumerate() {
            let f = |s: &str| format!("languages[{li}].{s}");
            if !ids.insert(&lang.id) {
                return Err(Error::validation(f("id"), format!("duplicate language `{}`", lang.id)));
            }
            let k = lang.alphabet_size;
            if k == 0 {
                return Err(Error::validation(f("alphabet_size"), "must be positive"));
            }
            if lang.transition.len() != k {
                return Err(Error::validation(f("transition"), format!("expected {k} rows")));
            }
            for (r, row) in lang.transition.iter().enumerate() {
                let field = f(&format!("transition[{r}]"));
                if row.len() != k {
                    return Err(Error::validation(field, format!("expected {k} columns")));
                }
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::validation(field, "entries must be finite and nonnegative"));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::validation(field, format!("row sums to {sum}, not 1")));
                }
            }
            if lang.emission_means.len() != k
                || lang.emission_means.iter().any(|m| m.len() != self.feature_dim)
            {
                return Err(Error::validation(
                    f("emission_means"),
                    format!("expected {k} x {} matrix", self.feature_dim),
                ));
            }
            if lang.emission_means.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::validation(f("emission_means"), "non-finite entry"));
            }
        }
        let mut ids = HashSet::new();
        for (di, dom) in self.domains.iter().enumerate() {
            let f = |s: &str| format!("domains[{di}].{s}");
            if !ids.insert(&dom.id) {
                return Err(Error::validation(f("id"), format!("duplicate domain `{}`", dom.id)));
            }
            if dom.channel_offset.len() != self.feature_dim
                || dom.channel_offset.iter().any(|v| !v.is_finite())
            {
                return Err(Error::validation(
                    f("channel_offset"),
                    format!("expected {} finite values", self.feature_dim),
                ));
            }
            if !dom.noise_sigma.is_finite() || dom.noise_sigma < 0.0 {
                return Err(Error::validation(f("noise_sigma"), "must be finite and >= 0"));
            }
            if dom.min_frames_per_phone == 0 || dom.min_frames_per_phone > dom.max_frames_per_phone {
                return Err(Error::validation(
                    f("min_frames_per_phone"),
                    "need 1 <= min_frames_per_phone <= max_frames_per_phone",
                ));
            }
        }
        let mut ids = HashSet::new();
        for (ci, c) in self.corpora.iter().enumerate() {
            let f = |s: &str| format!("corpora[{ci}].{s}");
            if !ids.insert(&c.corpus_id) {
                return Err(Error::validation(
                    f("corpus_id"),
                    format!("duplicate corpus_id `{}`", c.corpus_id),
                ));
            }
            if !self.languages.iter().any(|l| l.id == c.language_id) {
                return Err(Error::validation(
                    f("language_id"),
                    format!("undefined language `{}`", c.language_id),
                ));
            }
            if !self.domains.iter().any(|d| d.id == c.domain_id) {
                return Err(Error::validation(
                    f("domain_id"),
                    format!("undefined domain `{}`", c.domain_id),
                ));
            }
            if c.utterance_count == 0 {
                return Err(Error::validation(f("utterance_count"), "must be positive"));
            }
            if c.min_label_len == 0 || c.min_label_len > c.max_label_len {
                return Err(Error::validation(
                    f("min_label_len"),
                    "need 1 <= min_label_len <= max_label_len",
                ));
            }
        }
        Ok(())
    }

    fn language(&self, id: &str) -> &LanguageDef {
        self.languages.iter().find(|l| l.id == id).expect("validated")
    }

    fn domain(&self, id: &str) -> &DomainDef {
        self.domains.iter().find(|d| d.id == id).expect("validated")
    }
}

/// Generates every corpus of `spec`. A pure function of `spec`.
pub fn generate_corpus_set(spec: &SyntheticSpec) -> Result<CorpusSet> {
    spec.validate()?;
    let corpora: Vec<Corpus> = spec
        .corpora
        .par_iter()
        .enumerate()
        .map(|(index, def)| generate_corpus(spec, index, def))
        .collect();
    CorpusSet::new(corpora, spec.target_index, Some(spec.clone()))
}

fn generate_corpus(spec: &SyntheticSpec, index: usize, def: &CorpusDef) -> Corpus {
    let lang = spec.language(&def.language_id);
    let dom = spec.domain(&def.domain_id);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);

    let utterances = (0..def.utterance_count)
        .map(|_| generate_utterance(&mut rng, spec.feature_dim, lang, dom, def))
        .collect();
    Corpus {
        meta: CorpusMeta {
            corpus_id: def.corpus_id.clone(),
            language_id: lang.id.clone(),
            domain_id: dom.id.clone(),
            phone_alphabet: lang.phone_alphabet(),
            utterance_count: def.utterance_count,
        },
        utterances,
    }
}

fn generate_utterance(
    rng: &mut ChaCha8Rng,
    dim: usize,
    lang: &LanguageDef,
    dom: &DomainDef,
    def: &CorpusDef,
) -> Utterance {
    let len = rng.random_range(def.min_label_len..=def.max_label_len);
    let mut labels = Vec::with_capacity(len);
    let mut phone = rng.random_range(0..lang.alphabet_size);
    labels.push(phone);
    for _ in 1..len {
        phone = draw_categorical(rng, &lang.transition[phone]);
        labels.push(phone);
    }

    let mut data = Vec::new();
    let mut emit = |rng: &mut ChaCha8Rng, mean: Option<&[f64]>| {
        for j in 0..dim {
            let noise: f64 = StandardNormal.sample(rng);
            let base = mean.map_or(0.0, |m| m[j]);
            data.push(base + dom.channel_offset[j] + dom.noise_sigma * noise);
        }
    };
    for (i, &p) in labels.iter().enumerate() {
        if i > 0 && labels[i - 1] == p {
            emit(rng, None);
        }
        let dur = rng.random_range(dom.min_frames_per_phone..=dom.max_frames_per_phone);
        for _ in 0..dur {
            emit(rng, Some(&lang.emission_means[p]));
        }
    }
    let frames = data.len() / dim;
    Utterance {
        features: Matrix::from_vec(frames, dim, data).expect("frames * dim values"),
        labels,
    }
}

fn draw_categorical(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left the cumulative sum just under 1.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Compact description of a languages x domains factorial collection; expands
/// into a full [`SyntheticSpec`] with randomly drawn chains, emission means
/// and channel offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorialDesign {
    pub languages: usize,
    pub domains: usize,
    pub alphabet_size: usize,
    pub feature_dim: usize,
    /// `(language, domain, utterance_count)` per corpus, in output order.
    pub corpora: Vec<(usize, usize, usize)>,
    /// Standard deviation of emission-mean entries.
    pub emission_scale: f64,
    /// Standard deviation of channel-offset entries.
    pub offset_scale: f64,
    pub noise_sigma: f64,
    pub label_len: (usize, usize),
    pub frames_per_phone: (usize, usize),
    pub seed: u64,
    pub target_index: usize,
}

impl FactorialDesign {
    /// Two languages x two domains, two corpora per cell, 200 to 2,000
    /// utterances each, feature_dim 8. The 200-utterance corpus `L0-D0-a` is
    /// the target.
    pub fn eight_corpus(seed: u64) -> Self {
        Self {
            languages: 2,
            domains: 2,
            alphabet_size: 4,
            feature_dim: 8,
            corpora: vec![
                (0, 0, 200),
                (0, 0, 2000),
                (0, 1, 1000),
                (0, 1, 600),
                (1, 0, 1500),
                (1, 0, 400),
                (1, 1, 800),
                (1, 1, 1200),
            ],
            emission_scale: 1.0,
            offset_scale: 1.0,
            noise_sigma: 1.0,
            label_len: (3, 8),
            frames_per_phone: (2, 4),
            seed,
            target_index: 0,
        }
    }

    pub fn to_spec(&self) -> SyntheticSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        // Stream reserved for design parameters; corpus streams use 0..n.
        rng.set_stream(u64::MAX);
        let normal = |scale: f64| Normal::new(0.0, scale).expect("finite scale");
        let emission = normal(self.emission_scale);
        let offset = normal(self.offset_scale);
        let k = self.alphabet_size;

        let languages = (0..self.languages)
            .map(|l| LanguageDef {
                id: format!("L{l}"),
                alphabet_size: k,
                transition: (0..k)
                    .map(|_| {
                        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
                        let s: f64 = w.iter().sum();
                        w.into_iter().map(|x| x / s).collect()
                    })
                    .collect(),
                emission_means: (0..k)
                    .map(|_| (0..self.feature_dim).map(|_| emission.sample(&mut rng)).collect())
                    .collect(),
            })
            .collect();
        let domains = (0..self.domains)
            .map(|d| DomainDef {
                id: format!("D{d}"),
                channel_offset: (0..self.feature_dim).map(|_| offset.sample(&mut rng)).collect(),
                noise_sigma: self.noise_sigma,
                min_frames_per_phone: self.frames_per_phone.0,
                max_frames_per_phone: self.frames_per_phone.1,
            })
            .collect();
        let mut seen = std::collections::HashMap::new();
        let corpora = self
            .corpora
            .iter()
            .map(|&(l, d, count)| {
                let n = seen.entry((l, d)).or_insert(0u8);
                let suffix = (b'a' + *n) as char;
                *n += 1;
                CorpusDef {
                    corpus_id: format!("L{l}-D{d}-{suffix}"),
                    language_id: format!("L{l}"),
                    domain_id: format!("D{d}"),
                    utterance_count: count,
                    min_label_len: self.label_len.0,
                    max_label_len: self.label_len.1,
                }
            })
            .collect();
        SyntheticSpec {
            languages,
            domains,
            corpora,
            feature_dim: self.feature_dim,
            seed: self.seed,
            target_index: self.target_index,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_corpus_spec() -> SyntheticSpec {
        SyntheticSpec {
            languages: vec![LanguageDef {
                id: "L0".into(),
                alphabet_size: 2,
                transition: vec![vec![0.5, 0.5], vec![0.9, 0.1]],
                emission_means: vec![vec![1.0; 8], vec![-1.0; 8]],
            }],
            domains: vec![DomainDef {
                id: "D0".into(),
                channel_offset: vec![0.0; 8],
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
            feature_dim: 8,
            seed: 7,
            target_index: 0,
        }
    }

    #[test]
    fn shape_contract() {
        let set = generate_corpus_set(&one_corpus_spec()).unwrap();
        assert_eq!(set.len(), 1);
        let c = &set.corpora()[0];
        assert_eq!(c.utterances.len(), 20);
        for u in &c.utterances {
            assert!(u.frames() >= u.labels.len());
            assert!(u.frames() >= u.labels.len() + u.adjacent_repeats());
            assert_eq!(u.features.cols(), 8);
        }
    }

    #[test]
    fn determinism() {
        let spec = one_corpus_spec();
        let a = generate_corpus_set(&spec).unwrap();
        let b = generate_corpus_set(&spec).unwrap();
        assert_eq!(a, b);
        let bits = |s: &CorpusSet| -> Vec<u64> {
            s.corpora()[0]
                .utterances
                .iter()
                .flat_map(|u| u.features.as_slice().iter().map(|v| v.to_bits()))
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn row_sum_violation_names_field() {
        let mut spec = one_corpus_spec();
        spec.languages[0].transition[1] = vec![0.5, 0.4];
        let err = spec.validate().unwrap_err().to_string();
        assert!(err.contains("languages[0].transition[1]"), "{err}");
    }

    #[test]
    fn dangling_reference_names_field() {
        let mut spec = one_corpus_spec();
        spec.corpora[0].domain_id = "nope".into();
        let err = generate_corpus_set(&spec).unwrap_err().to_string();
        assert!(err.contains("corpora[0].domain_id"), "{err}");
    }

    #[test]
    fn factorial_spec_is_valid_and_seeded() {
        let design = FactorialDesign::eight_corpus(3);
        let spec = design.to_spec();
        spec.validate().unwrap();
        assert_eq!(spec.corpora.len(), 8);
        assert_eq!(spec.corpora[0].corpus_id, "L0-D0-a");
        assert_eq!(spec.corpora[1].corpus_id, "L0-D0-b");
        assert_eq!(spec, design.to_spec());
        assert_ne!(spec, FactorialDesign::eight_corpus(4).to_spec());
    }
}

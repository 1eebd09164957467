mod common;

use proptest::prelude::*;

use crs_core::corpus::{
    generate_corpus_set, load_corpus_set, save_corpus_set, CorpusDef, DomainDef, FactorialDesign, LanguageDef,
};
use crs_core::SyntheticSpec;

fn factorial_spec(emission_zero: bool, seed: u64) -> SyntheticSpec {
    let mut design = FactorialDesign::eight_corpus(seed);
    design.corpora = vec![(0, 0, 150), (0, 1, 150), (1, 0, 150), (1, 1, 150)];
    let mut spec = design.to_spec();
    if emission_zero {
        for lang in &mut spec.languages {
            for row in &mut lang.emission_means {
                row.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }
    spec
}

#[test]
fn shared_language_means_shared_alphabet() {
    let set = generate_corpus_set(&factorial_spec(false, 1)).unwrap();
    let meta: Vec<_> = set.corpora().iter().map(|c| &c.meta).collect();
    for a in &meta {
        for b in &meta {
            if a.language_id == b.language_id {
                assert_eq!(a.phone_alphabet, b.phone_alphabet);
            } else {
                assert!(a.phone_alphabet.iter().all(|p| !b.phone_alphabet.contains(p)));
            }
        }
    }
}

#[test]
fn frame_means_follow_the_domain_offset() {
    let spec = factorial_spec(true, 2);
    let set = generate_corpus_set(&spec).unwrap();
    let dim = spec.feature_dim;
    let mut means = Vec::new();
    for (corpus, def) in set.corpora().iter().zip(&spec.corpora) {
        let dom = spec.domains.iter().find(|d| d.id == def.domain_id).unwrap();
        let mut sum = vec![0.0; dim];
        let mut n = 0usize;
        for u in &corpus.utterances {
            for row in u.features.iter_rows() {
                sum.iter_mut().zip(row).for_each(|(s, v)| *s += v);
                n += 1;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let bound = 3.0 * dom.noise_sigma / (n as f64).sqrt();
        for (j, (m, o)) in mean.iter().zip(&dom.channel_offset).enumerate() {
            assert!((m - o).abs() < bound, "{} dim {j}: |{m} - {o}| >= {bound}", def.corpus_id);
        }
        means.push((def.domain_id.clone(), mean, n));
    }
    // Corpora of the same domain but different languages agree with each other.
    for (i, (da, ma, na)) in means.iter().enumerate() {
        for (db, mb, nb) in &means[i + 1..] {
            if da == db {
                let sigma = spec.domains.iter().find(|d| &d.id == da).unwrap().noise_sigma;
                let bound = 3.0 * sigma * (1.0 / *na as f64 + 1.0 / *nb as f64).sqrt();
                assert!(ma.iter().zip(mb).all(|(a, b)| (a - b).abs() < bound));
            }
        }
    }
}

fn arb_spec() -> impl Strategy<Value = SyntheticSpec> {
    (1usize..4, 1usize..4, 1usize..3, 0usize..2, 1usize..6, any::<u64>()).prop_map(
        |(alphabet, dim, min_frames, extra_frames, max_len, seed)| SyntheticSpec {
            languages: vec![LanguageDef {
                id: "L".into(),
                alphabet_size: alphabet,
                transition: vec![vec![1.0 / alphabet as f64; alphabet]; alphabet],
                emission_means: vec![vec![0.5; dim]; alphabet],
            }],
            domains: vec![DomainDef {
                id: "D".into(),
                channel_offset: vec![0.1; dim],
                noise_sigma: 1.0,
                min_frames_per_phone: min_frames,
                max_frames_per_phone: min_frames + extra_frames,
            }],
            corpora: vec![CorpusDef {
                corpus_id: "c".into(),
                language_id: "L".into(),
                domain_id: "D".into(),
                utterance_count: 15,
                min_label_len: 1,
                max_label_len: max_len,
            }],
            feature_dim: dim,
            seed,
            target_index: 0,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_utterance_is_ctc_feasible(spec in arb_spec()) {
        let set = generate_corpus_set(&spec).unwrap();
        for u in &set.corpora()[0].utterances {
            prop_assert!(u.labels.len() <= u.frames());
            prop_assert!(u.frames() >= u.labels.len() + u.adjacent_repeats());
            prop_assert!(u.labels.iter().all(|&p| p < spec.languages[0].alphabet_size));
        }
    }

    #[test]
    fn generation_is_pure(spec in arb_spec()) {
        prop_assert_eq!(generate_corpus_set(&spec).unwrap(), generate_corpus_set(&spec).unwrap());
    }
}

#[test]
fn store_round_trips_a_factorial_set() {
    let set = common::small_set(&[12, 7, 9], 4);
    let dir = tempfile::tempdir().unwrap();
    save_corpus_set(&set, dir.path()).unwrap();
    assert_eq!(load_corpus_set(dir.path()).unwrap(), set);
}

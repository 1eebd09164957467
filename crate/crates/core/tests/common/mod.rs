#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crs_core::acoustic::BLANK;
use crs_core::corpus::{generate_corpus_set, FactorialDesign};
use crs_core::{CorpusSet, EncoderParams, FrameLogProbs, Matrix, ModelConfig};

/// A small factorial collection with `counts[i]` utterances in corpus `i`,
/// corpora cycling through the (language, domain) cells.
pub fn small_set(counts: &[usize], seed: u64) -> CorpusSet {
    let mut design = FactorialDesign::eight_corpus(seed);
    design.corpora = counts.iter().enumerate().map(|(i, &c)| ((i / 2) % 2, i % 2, c)).collect();
    generate_corpus_set(&design.to_spec()).unwrap()
}

/// -log P(y | lp) by summing over every frame-level path that collapses to
/// `phones` (repeats merged, then blanks dropped).
pub fn brute_force_ctc(lp: &FrameLogProbs, phones: &[usize]) -> f64 {
    let m = lp.matrix();
    let (t_len, c) = (m.rows(), m.cols());
    let target: Vec<usize> = phones.iter().map(|p| p + 1).collect();
    let mut total = 0.0;
    let mut path = vec![0usize; t_len];
    loop {
        let mut collapsed = Vec::new();
        let mut prev = None;
        for &k in &path {
            if Some(k) != prev && k != BLANK {
                collapsed.push(k);
            }
            prev = Some(k);
        }
        if collapsed == target {
            total += path.iter().enumerate().map(|(t, &k)| m.get(t, k)).sum::<f64>().exp();
        }
        let mut i = 0;
        loop {
            if i == t_len {
                return -total.ln();
            }
            path[i] += 1;
            if path[i] < c {
                break;
            }
            path[i] = 0;
            i += 1;
        }
    }
}

/// Plain Levenshtein recursion without memoization.
pub fn edit_distance_recursive(a: &[u8], b: &[u8]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = edit_distance_recursive(ra, rb) + usize::from(x != y);
            let del = edit_distance_recursive(ra, b) + 1;
            let ins = edit_distance_recursive(a, rb) + 1;
            sub.min(del).min(ins)
        }
    }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Random label sequence over `alphabet` phones that fits in `frames`.
pub fn feasible_labels(rng: &mut ChaCha8Rng, frames: usize, alphabet: usize, max_len: usize) -> Vec<usize> {
    loop {
        let len = rng.random_range(0..=max_len.min(frames));
        let labels: Vec<usize> = (0..len).map(|_| rng.random_range(0..alphabet)).collect();
        let repeats = labels.windows(2).filter(|w| w[0] == w[1]).count();
        if labels.len() + repeats <= frames {
            return labels;
        }
    }
}

/// One random end-to-end instance: model, features, embedding row, labels.
pub struct GradCase {
    pub params: EncoderParams,
    pub features: Matrix,
    pub embedding: Vec<f64>,
    pub labels: Vec<usize>,
    pub language: String,
}

pub fn random_grad_case(rng: &mut ChaCha8Rng) -> GradCase {
    let config = ModelConfig {
        layers: rng.random_range(1..=2),
        hidden_size: rng.random_range(1..=8),
    };
    let input = rng.random_range(1..=4);
    let alphabet = rng.random_range(1..=4);
    let frames = rng.random_range(1..=10);
    let languages: BTreeMap<String, usize> = [("L0".to_string(), alphabet), ("L1".to_string(), 2)].into();
    let mut params = EncoderParams::init(&config, input, &languages, rng.random()).unwrap();
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    GradCase {
        params,
        features: random_matrix(rng, frames, input, 1.0),
        embedding: (0..input).map(|_| rng.random_range(-0.5..0.5)).collect(),
        labels: feasible_labels(rng, frames, alphabet, 4),
        language: "L0".into(),
    }
}

/// Worst relative error between analytic gradients and central differences
/// over every parameter (step `eps_w`) and every embedding component (step
/// `eps_e`). Components where both magnitudes are below `floor` are compared
/// against `floor`.
pub fn grad_check(case: &GradCase, eps_w: f64, eps_e: f64, floor: f64) -> f64 {
    let loss = |p: &EncoderParams, e: &[f64]| {
        let lp = p.log_probs(&case.features, e, &case.language).unwrap();
        crs_core::acoustic::ctc_loss(&lp, &case.labels).unwrap().0
    };
    let g = case
        .params
        .loss_and_grad(&case.features, &case.embedding, &case.labels, &case.language)
        .unwrap();
    let rel = |an: f64, fd: f64| (an - fd).abs() / an.abs().max(fd.abs()).max(floor);

    let mut worst: f64 = 0.0;
    let analytic: Vec<Vec<f64>> = g.params.tensors().iter().map(|t| t.to_vec()).collect();
    for (ti, grad) in analytic.iter().enumerate() {
        for (j, &an) in grad.iter().enumerate() {
            let mut plus = case.params.clone();
            plus.tensors_mut()[ti][j] += eps_w;
            let mut minus = case.params.clone();
            minus.tensors_mut()[ti][j] -= eps_w;
            let fd = (loss(&plus, &case.embedding) - loss(&minus, &case.embedding)) / (2.0 * eps_w);
            worst = worst.max(rel(an, fd));
        }
    }
    for j in 0..case.embedding.len() {
        let mut plus = case.embedding.clone();
        plus[j] += eps_e;
        let mut minus = case.embedding.clone();
        minus[j] -= eps_e;
        let fd = (loss(&case.params, &plus) - loss(&case.params, &minus)) / (2.0 * eps_e);
        worst = worst.max(rel(g.embedding[j], fd));
    }
    worst
}

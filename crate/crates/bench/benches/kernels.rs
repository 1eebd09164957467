use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crs_core::acoustic::ctc_loss;
use crs_core::sampler::sampling_distribution;
use crs_core::trainer::edit_distance;
use crs_core::{EncoderParams, FrameLogProbs, Matrix, ModelConfig, SimilarityVector};

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn ctc(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("ctc_loss");
    for frames in [20usize, 100, 400] {
        let lp = FrameLogProbs::from_logits(random_matrix(&mut rng, frames, 5));
        let labels: Vec<usize> = (0..frames / 4).map(|i| i % 4).collect();
        group.bench_with_input(BenchmarkId::from_parameter(frames), &frames, |b, _| {
            b.iter(|| ctc_loss(&lp, &labels).unwrap())
        });
    }
    group.finish();
}

fn sampler(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut group = c.benchmark_group("sampling_distribution");
    for n in [8usize, 64, 1024] {
        let s = SimilarityVector {
            scores: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            target_index: 0,
        };
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| sampling_distribution(&s, 25.0).unwrap())
        });
    }
    group.finish();
}

fn encoder(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let languages: BTreeMap<String, usize> = [("L0".to_string(), 4)].into();
    let mut group = c.benchmark_group("encoder_loss_and_grad");
    for (name, config) in [
        ("default", ModelConfig::default()),
        (
            "2x64",
            ModelConfig {
                layers: 2,
                hidden_size: 64,
            },
        ),
    ] {
        let params = EncoderParams::init(&config, 8, &languages, 4).unwrap();
        let x = random_matrix(&mut rng, 40, 8);
        let e = vec![0.05; 8];
        let labels = [0, 1, 2, 3, 2, 1, 0, 3];
        group.bench_function(name, |b| b.iter(|| params.loss_and_grad(&x, &e, &labels, "L0").unwrap()));
    }
    group.finish();
}

fn edit(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let hyp: Vec<u8> = (0..60).map(|_| rng.random_range(0..4)).collect();
    let reference: Vec<u8> = (0..60).map(|_| rng.random_range(0..4)).collect();
    c.bench_function("edit_distance/60x60", |b| b.iter(|| edit_distance(&hyp, &reference)));
}

criterion_group!(benches, ctc, sampler, encoder, edit);
criterion_main!(benches);

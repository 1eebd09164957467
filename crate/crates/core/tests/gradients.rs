mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{grad_check, random_grad_case};
use crs_core::acoustic::Sgd;
use crs_core::EmbeddingMatrix;

#[test]
fn end_to_end_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst: f64 = 0.0;
    for case_no in 0..200 {
        let case = random_grad_case(&mut rng);
        let err = grad_check(&case, 1e-4, 1e-5, 1e-6);
        assert!(err < 1e-4, "case {case_no}: relative error {err}");
        worst = worst.max(err);
    }
    eprintln!("worst relative error {worst:e}");
}

#[test]
fn embedding_gradient_has_feature_dim_and_is_finite() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let case = random_grad_case(&mut rng);
    let g = case
        .params
        .loss_and_grad(&case.features, &case.embedding, &case.labels, &case.language)
        .unwrap();
    assert_eq!(g.embedding.len(), case.features.cols());
    assert!(g.embedding.iter().all(|v| v.is_finite()));
}

#[test]
fn step_touches_only_the_sampled_row() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let case = random_grad_case(&mut rng);
    let dim = case.features.cols();
    let ids: Vec<String> = (0..3).map(|i| format!("c{i}")).collect();
    let rows = vec![vec![0.1; dim], case.embedding.clone(), vec![-0.2; dim]];
    let mut e = EmbeddingMatrix::new(ids, rows.clone()).unwrap();
    let mut params = case.params.clone();
    let g = params
        .loss_and_grad(&case.features, e.row(1), &case.labels, &case.language)
        .unwrap();
    Sgd::default()
        .step(&mut params, &g.params, &mut e, &[(1, g.embedding.clone())])
        .unwrap();
    assert_eq!(e.row(0), &rows[0][..]);
    assert_eq!(e.row(2), &rows[2][..]);
    if g.embedding.iter().any(|&v| v != 0.0) {
        assert_ne!(e.row(1), &rows[1][..]);
    }
}

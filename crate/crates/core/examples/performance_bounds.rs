//! Bounds for the deterministic rule and widening to a higher confidence level.
//!
//! `cargo run --release --example performance_bounds`

use mrc::classifier::{deterministic_bounds, evaluate, high_confidence_bounds, train, FeatureConfig, TrainConfig};
use mrc::dataset::stratified_split;
use mrc::{Dataset, SolverConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn blobs(n: usize, d: usize, k: usize, seed: u64) -> Dataset {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let centers = Array2::from_shape_fn((k, d), |_| r.gen_range(-2.0..2.0));
    let x = Array2::from_shape_fn((n, d), |(i, j)| centers[[i % k, j]] + r.sample::<f64, _>(StandardNormal));
    Dataset::from_encoded(x, (0..n).map(|i| i % k + 1).collect(), k).unwrap()
}

fn main() -> mrc::Result<()> {
    let data = blobs(800, 3, 3, 4);
    let (train_set, test_set) = stratified_split(&data, 0.25, 0)?;
    let model = train(&train_set, &FeatureConfig::rff(100, None, 0), &TrainConfig::default())?;
    let eval = evaluate(&model, &test_set)?;
    println!(
        "randomized rule:    R̲ = {:.4}  R̄ = {:.4}  test risk {:.4}",
        model.lower_bound.unwrap(),
        model.minimax_risk,
        eval.randomized_risk
    );
    let det = deterministic_bounds(&model, &SolverConfig::default())?;
    println!(
        "deterministic rule: R̲ = {:.4}  R̄ = {:.4}  test error {:.4}",
        det.lower, det.upper, eval.deterministic_error
    );
    for scale in [1.5, 2.0, 3.0] {
        let wider = &model.uncertainty.lambda * scale;
        let hc = high_confidence_bounds(&model, wider.view())?;
        println!("λ × {scale}: risk of the randomized rule in [{:.4}, {:.4}]", hc.lo, hc.hi);
    }
    Ok(())
}

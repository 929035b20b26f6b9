//! Compares the standard classifier with the fixed-marginal variant.
//!
//! `cargo run --release --example fixed_marginal`

use mrc::classifier::{evaluate, train, FeatureConfig, TrainConfig};
use mrc::dataset::stratified_split;
use mrc::{Dataset, SolverConfig, Variant};
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
    let data = blobs(600, 4, 3, 8);
    let (train_set, test_set) = stratified_split(&data, 0.2, 0)?;
    let features = FeatureConfig::rff(100, None, 0);
    for variant in [Variant::Standard, Variant::FixedMarginal] {
        let config = TrainConfig {
            variant,
            solver: SolverConfig::default().with_max_iters(20_000),
            lower_bound: false,
            ..TrainConfig::default()
        };
        let model = train(&train_set, &features, &config)?;
        let eval = evaluate(&model, &test_set)?;
        println!(
            "{variant:?}: R̄ = {:.4}, test risk {:.4}, test error {:.4}",
            model.minimax_risk, eval.randomized_risk, eval.deterministic_error
        );
    }
    Ok(())
}

//! Chooses the kernel scale by the smallest minimax risk.
//!
//! `cargo run --release --example model_selection`

use mrc::classifier::{evaluate, FeatureConfig, TrainConfig};
use mrc::dataset::{fit_normalizer, stratified_split};
use mrc::experiments::{model_select, sigma_grid};
use mrc::{Dataset, SolverConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn rings(n: usize, seed: u64) -> Dataset {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, 2));
    for i in 0..n {
        let radius = if i % 2 == 0 { 1.0 } else { 2.0 };
        let t = r.gen_range(0.0..std::f64::consts::TAU);
        let noise: f64 = r.sample(StandardNormal);
        x[[i, 0]] = (radius + 0.25 * noise) * t.cos();
        x[[i, 1]] = (radius + 0.25 * noise) * t.sin();
    }
    Dataset::from_encoded(x, (0..n).map(|i| i % 2 + 1).collect(), 2).unwrap()
}

fn main() -> mrc::Result<()> {
    let data = rings(600, 7);
    let (train_set, test_set) = stratified_split(&data, 0.2, 0)?;
    let normalized = fit_normalizer(&train_set)?.apply(&train_set)?;
    let sigmas = sigma_grid(normalized.instances(), 8, 0)?;
    let config = TrainConfig {
        solver: SolverConfig::default().with_max_iters(20_000),
        lower_bound: false,
        ..TrainConfig::default()
    };
    let selection = model_select(&train_set, &FeatureConfig::rff(100, None, 0), &config, &sigmas)?;
    for c in &selection.candidates {
        let mark = if c.sigma == selection.sigma { "  <- chosen" } else { "" };
        println!("σ = {:>8.4}  R̄ = {:.4}{mark}", c.sigma, c.upper);
    }
    let eval = evaluate(&selection.model, &test_set)?;
    println!("test deterministic error {:.4}", eval.deterministic_error);
    Ok(())
}

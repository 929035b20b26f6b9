//! Train a classifier, report its minimax risk bounds and test errors.
//!
//! `cargo run --release --example quickstart [data.csv]` (label in the last column).

use mrc::classifier::{evaluate, train, FeatureConfig, TrainConfig};
use mrc::dataset::{load_csv, stratified_split};
use mrc::Dataset;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn two_moons(n: usize, seed: u64) -> Dataset {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let t = r.gen_range(0.0..std::f64::consts::PI);
        let (cx, cy) = if i % 2 == 0 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
        let (nx, ny): (f64, f64) = (r.sample(StandardNormal), r.sample(StandardNormal));
        x[[i, 0]] = cx + 0.2 * nx;
        x[[i, 1]] = cy + 0.2 * ny;
        labels.push(i % 2 + 1);
    }
    Dataset::from_encoded(x, labels, 2).unwrap()
}

fn main() -> mrc::Result<()> {
    let data = match std::env::args().nth(1) {
        Some(path) => load_csv(path, false)?,
        None => two_moons(600, 1),
    };
    let (train_set, test_set) = stratified_split(&data, 0.2, 0)?;
    let model = train(&train_set, &FeatureConfig::default(), &TrainConfig::default())?;
    let eval = evaluate(&model, &test_set)?;
    println!("n = {}, |Y| = {}, m = {}", train_set.n(), model.num_classes(), model.feature_map.dim());
    println!("minimax risk R̄ = {:.4}", model.minimax_risk);
    if let Some(lower) = model.lower_bound {
        println!("lower bound  R̲ = {lower:.4}");
    }
    println!("solver: {} ({} iterations)", model.solver.label(), model.solver.iterations);
    println!("test randomized risk   {:.4}", eval.randomized_risk);
    println!("test deterministic err {:.4}", eval.deterministic_error);
    let x = test_set.instance(0);
    println!("h(·|x₀) = {:?}, prediction {}", model.predict_proba(x)?, model.predict(x)?);
    Ok(())
}

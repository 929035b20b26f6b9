//! Bounds computed over random subsets of a large unlabeled pool.
//!
//! `cargo run --release --example reduced_instances`

use mrc::classifier::FeatureConfig;
use mrc::estimate::LambdaEstimator;
use mrc::experiments::{reduce_study, ReductionSetup};
use mrc::{Dataset, Method, SolverConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn blobs(n: usize, seed: u64) -> Dataset {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, 2), |(i, _)| if i % 2 == 0 { -0.7 } else { 0.7 } + r.sample::<f64, _>(StandardNormal));
    Dataset::from_encoded(x, (0..n).map(|i| i % 2 + 1).collect(), 2).unwrap()
}

fn main() -> mrc::Result<()> {
    let train_set = blobs(300, 5);
    let pool = blobs(5000, 6).instances().to_owned();
    let setup = ReductionSetup::new(&train_set, pool.view(), &FeatureConfig::rff(10, None, 1), &LambdaEstimator::default())?;
    let mut config = SolverConfig::new(Method::Lp);
    config.lp_budget.max_rows = 20_000;
    let study = reduce_study(&setup, &[50, 200, 1000], 5, 0, &config, 0.05)?;
    println!("full pool: R̄ = {:.5}, R̲ = {:.5}", study.full_upper, study.full_lower);
    println!("{:>6} {:>12} {:>12} {:>10}", "s", "median gap", "mean R̄_s", "ε_s");
    for row in &study.summary {
        println!("{:>6} {:>12.5} {:>12.5} {:>10.4}", row.s, row.median_gap, row.mean_upper, row.epsilon_s);
    }
    Ok(())
}

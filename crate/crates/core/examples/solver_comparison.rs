//! Runs every solver on one learning problem and compares values and speed.
//!
//! `cargo run --release --example solver_comparison`

use mrc::classifier::FeatureConfig;
use mrc::estimate::{LambdaEstimator, UncertaintySet};
use mrc::experiments::bench_solvers;
use mrc::objective::build_learning_problem;
use mrc::{Dataset, Method, NormalizationStats, SolverConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn blobs(n: usize, d: usize, k: usize, seed: u64) -> Dataset {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let centers = Array2::from_shape_fn((k, d), |_| r.gen_range(-1.5..1.5));
    let x = Array2::from_shape_fn((n, d), |(i, j)| centers[[i % k, j]] + r.sample::<f64, _>(StandardNormal));
    Dataset::from_encoded(x, (0..n).map(|i| i % k + 1).collect(), k).unwrap()
}

fn main() -> mrc::Result<()> {
    let data = blobs(150, 4, 3, 2);
    let x = NormalizationStats::fit(data.instances())?.apply_matrix(data.instances())?;
    let map = FeatureConfig::rff(40, None, 0).build(x.view(), data.num_classes())?;
    let u = UncertaintySet::estimate(&map, x.view(), data.labels(), &LambdaEstimator::default())?;
    let problem = build_learning_problem(&u, x.view(), &map)?;
    println!("m = {}, p = {}", problem.dim(), problem.num_rows());

    let config = SolverConfig::default().with_max_iters(20_000).with_restart_period(5_000);
    let result = bench_solvers(&problem, &Method::ALL, &config)?;
    if let Some(opt) = result.lp_optimum {
        println!("LP optimum {opt:.6}");
    }
    println!("{:<14} {:>8} {:>12} {:>12} {:>10}", "method", "iters", "best", "µs/iter", "γ");
    for e in &result.entries {
        println!(
            "{:<14} {:>8} {:>12.6} {:>12.2} {:>10.4}",
            e.method.name(),
            e.iterations,
            e.best_value,
            e.seconds_per_iteration * 1e6,
            e.sparsity_gamma
        );
    }
    Ok(())
}

//! Confidence vectors from each estimator and their effect on the bounds.
//!
//! `cargo run --release --example confidence_vectors`

use mrc::classifier::{train, FeatureConfig, TrainConfig};
use mrc::estimate::{LambdaEstimator, UncertaintySet};
use mrc::{Dataset, NormalizationStats, SolverConfig};
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
    let data = blobs(500, 3, 2, 3);
    let features = FeatureConfig::rff(50, None, 0);
    let x = NormalizationStats::fit(data.instances())?.apply_matrix(data.instances())?;
    let map = features.build(x.view(), 2)?;
    let estimators = [
        LambdaEstimator::Practical { lambda0: 0.3 },
        LambdaEstimator::Hoeffding { delta: 0.05 },
        LambdaEstimator::Bernstein { delta: 0.05 },
        LambdaEstimator::Rademacher { delta: 0.05, r: 1.0 },
    ];
    println!("{:<40} {:>10} {:>10} {:>8} {:>8}", "estimator", "mean λ", "max λ", "R̄", "R̲");
    for estimator in estimators {
        let u = UncertaintySet::estimate(&map, x.view(), data.labels(), &estimator)?;
        let config = TrainConfig {
            estimator: estimator.clone(),
            solver: SolverConfig::default().with_max_iters(20_000),
            ..TrainConfig::default()
        };
        let model = train(&data, &features, &config)?;
        println!(
            "{:<40} {:>10.4} {:>10.4} {:>8.4} {:>8.4}",
            format!("{estimator:?}"),
            u.lambda.mean().unwrap_or(0.0),
            u.lambda.iter().copied().fold(0.0, f64::max),
            model.minimax_risk,
            model.lower_bound.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

//! Saves a model to JSON and checks the reloaded copy predicts identically.
//!
//! `cargo run --release --example model_persistence [model.json]`

use mrc::classifier::{train, FeatureConfig, TrainConfig};
use mrc::{Dataset, MrcModel};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> mrc::Result<()> {
    let mut r = ChaCha8Rng::seed_from_u64(9);
    let x = Array2::from_shape_fn((300, 3), |(i, _)| (i % 2) as f64 + r.sample::<f64, _>(StandardNormal));
    let data = Dataset::from_encoded(x, (0..300).map(|i| i % 2 + 1).collect(), 2)?;
    let model = train(&data, &FeatureConfig::rff(50, None, 0), &TrainConfig::default())?;

    let path = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("mrc_example_model.json"));
    model.save(&path)?;
    let loaded = MrcModel::load(&path)?;
    let same = data
        .instances()
        .outer_iter()
        .all(|xi| model.predict_proba(xi).unwrap() == loaded.predict_proba(xi).unwrap());
    println!("saved to {}", path.display());
    println!("R̄ = {:.6} / {:.6} after reload", model.minimax_risk, loaded.minimax_risk);
    println!("identical probabilities on all {} instances: {same}", data.n());
    Ok(())
}

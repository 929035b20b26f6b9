use ndarray::{array, Array1};

use mrc::features::{FeatureMap, FeatureMapSpec};

fn rff(d: usize, k: usize, freqs: usize, sigma: f64, seed: u64) -> FeatureMap {
    FeatureMap::new(FeatureMapSpec::random_fourier(d, k, freqs, Some(sigma), seed)).unwrap()
}

#[test]
fn kernel_is_approximated_on_average_over_seeds() {
    // ΨᵀΨ'/D averages cos(uᵀ(x − x')), whose mean is the Gaussian kernel and
    // whose per-frequency variance is at most 1/2.
    let x = array![0.3, -0.2, 0.5];
    let x2 = array![-0.4, 0.1, 0.9];
    let sigma = 1.2;
    let (freqs, reps) = (50, 400);
    let dist2: f64 = (&x - &x2).mapv(|v| v * v).sum();
    let kernel = (-dist2 / (2.0 * sigma * sigma)).exp();
    let mut total = 0.0;
    for seed in 0..reps {
        let map = rff(3, 2, freqs, sigma, seed);
        let a = map.scalar_features(x.view()).unwrap();
        let b = map.scalar_features(x2.view()).unwrap();
        total += a.dot(&b) / freqs as f64;
    }
    let estimate = total / reps as f64;
    let sd = (0.5 / (freqs * reps as usize) as f64).sqrt();
    assert!(
        (estimate - kernel).abs() < 4.0 * sd,
        "estimate {estimate}, kernel {kernel}, 4σ = {}",
        4.0 * sd
    );
}

#[test]
fn identical_specs_give_identical_features() {
    let a = rff(4, 3, 20, 0.7, 11);
    let b = rff(4, 3, 20, 0.7, 11);
    assert_eq!(a.frequencies(), b.frequencies());
    let x = array![1.0, -2.0, 0.5, 0.0];
    for y in 1..=3 {
        assert_eq!(a.feature_map(x.view(), y).unwrap(), b.feature_map(x.view(), y).unwrap());
    }
    let c = rff(4, 3, 20, 0.7, 12);
    assert_ne!(a.frequencies(), c.frequencies());
}

#[test]
fn one_block_per_label_and_blocks_sum_to_repeated_psi() {
    let map = rff(2, 4, 6, 1.0, 5);
    let x = array![0.25, -1.5];
    let psi = map.scalar_features(x.view()).unwrap();
    let width = map.block_len();
    let mut sum = Array1::<f64>::zeros(map.dim());
    for y in 1..=4 {
        let phi = map.feature_map(x.view(), y).unwrap();
        for block in 0..4 {
            let part = phi.slice(ndarray::s![block * width..(block + 1) * width]);
            if block + 1 == y {
                assert_eq!(part, psi);
            } else {
                assert!(part.iter().all(|&v| v == 0.0));
            }
        }
        sum += &phi;
    }
    for block in 0..4 {
        assert_eq!(sum.slice(ndarray::s![block * width..(block + 1) * width]), psi);
    }
}

#[test]
fn spec_round_trips_through_json_and_regenerates_frequencies() {
    let map = rff(3, 2, 10, 0.9, 77);
    let text = serde_json::to_string(&map).unwrap();
    let back: FeatureMap = serde_json::from_str(&text).unwrap();
    assert_eq!(back.frequencies(), map.frequencies());
    assert!(!text.contains("[["), "frequency matrix should not be stored: {text}");
}

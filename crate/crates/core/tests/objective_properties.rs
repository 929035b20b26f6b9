mod common;

use ndarray::{Array1, Array2};
use proptest::prelude::*;

use mrc::features::{class_scores, FeatureMap, FeatureMapSpec};
use mrc::objective::{build_learning_problem, phi, phi_from_scores};

use common::{given_set, phi_enumerated};

fn scores_strategy() -> impl Strategy<Value = Vec<f64>> {
    (1usize..=6).prop_flat_map(|k| proptest::collection::vec(-5.0f64..5.0, k))
}

proptest! {
    #[test]
    fn prefix_scan_matches_enumeration(scores in scores_strategy()) {
        let fast = phi_from_scores(&scores);
        let slow = phi_enumerated(&scores);
        prop_assert!((fast - slow).abs() <= 1e-12, "{fast} vs {slow}");
    }

    #[test]
    fn phi_is_at_least_minus_one_over_k(scores in scores_strategy()) {
        // Mean of all scores minus 1/k is one candidate; zero scores give exactly −1/k.
        let k = scores.len() as f64;
        let zeros = vec![0.0; scores.len()];
        prop_assert!((phi_from_scores(&zeros) + 1.0 / k).abs() < 1e-15);
        prop_assert!(phi_from_scores(&scores) >= (scores.iter().sum::<f64>() - 1.0) / k - 1e-12);
    }

    #[test]
    fn learning_objective_matches_direct_formula(
        seed in 0u64..1000,
        k in 2usize..=4,
        s in 1usize..8,
        scale in 0.1f64..3.0,
    ) {
        let mut r = common::rng(seed);
        use rand::Rng;
        let d = 3;
        let map = FeatureMap::new(FeatureMapSpec::random_fourier(d, k, 4, Some(1.0), seed)).unwrap();
        let anchor = Array2::from_shape_fn((s, d), |_| r.gen_range(-2.0..2.0));
        let m = map.dim();
        let tau = Array1::from_shape_fn(m, |_| r.gen_range(-0.5..0.5));
        let lambda = Array1::from_shape_fn(m, |_| r.gen_range(0.0..0.2));
        let u = given_set(tau.clone(), lambda.clone(), &map);
        let problem = build_learning_problem(&u, anchor.view(), &map).unwrap();
        prop_assert_eq!(problem.num_rows(), s * ((1 << k) - 1));
        let mu = Array1::from_shape_fn(m, |_| scale * r.gen_range(-1.0..1.0));
        let direct = 1.0 - tau.dot(&mu)
            + phi(mu.view(), anchor.view(), &map).unwrap()
            + lambda.iter().zip(&mu).map(|(l, x)| l * x.abs()).sum::<f64>();
        prop_assert!((problem.value(mu.view()) - direct).abs() <= 1e-12);
    }

    #[test]
    fn scaling_features_and_parameters_keeps_row_products(seed in 0u64..1000, c in 0.1f64..10.0) {
        use rand::Rng;
        let mut r = common::rng(seed);
        let problem = common::random_problem(6, 15, seed);
        let mu = Array1::from_shape_fn(6, |_| r.gen_range(-1.0..1.0));
        let scaled_f = &problem.f * c;
        let scaled_mu = &mu / c;
        let a = problem.f.dot(&mu);
        let b = scaled_f.dot(&scaled_mu);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
        let argmax = |v: &Array1<f64>| v.iter().enumerate().fold(0, |best, (i, x)| if *x > v[best] { i } else { best });
        prop_assert_eq!(argmax(&(a + &problem.b)), argmax(&(b + &problem.b)));
    }
}

#[test]
fn phi_over_anchor_is_the_largest_instance_value() {
    let map = FeatureMap::new(FeatureMapSpec::random_fourier(2, 3, 5, Some(1.0), 3)).unwrap();
    let anchor = ndarray::array![[0.0, 0.0], [1.0, -1.0], [0.5, 2.0]];
    let mu = Array1::from_shape_fn(map.dim(), |i| ((i * 7) % 5) as f64 - 2.0);
    let psi = map.scalar_matrix(anchor.view()).unwrap();
    let expected = psi
        .outer_iter()
        .map(|p| phi_enumerated(&class_scores(p, mu.view(), 3)))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((phi(mu.view(), anchor.view(), &map).unwrap() - expected).abs() < 1e-12);
}

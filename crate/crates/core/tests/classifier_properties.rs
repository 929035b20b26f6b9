mod common;

use ndarray::Array1;
use rand::Rng;

use mrc::classifier::{self, exact_risk_finite, Anchor, FeatureConfig, TrainConfig, Variant};
use mrc::solver::{Method, SolverConfig};
use mrc::MrcModel;

use common::{gaussian_blobs, given_set, model_on_support, small_rff, FiniteDistribution};

fn lp_config() -> TrainConfig {
    TrainConfig {
        solver: SolverConfig::new(Method::Lp),
        ..TrainConfig::default()
    }
}

#[test]
fn exact_risk_lies_between_certified_bounds() {
    for (seed, k) in [(1u64, 2usize), (2, 3), (3, 2)] {
        let dist = FiniteDistribution::random(12, 2, k, seed);
        let map = small_rff(2, k, 3, seed);
        let tau_inf = dist.expectation(&map);
        let mut r = common::rng(seed + 100);
        let e = Array1::from_shape_fn(map.dim(), |_| r.gen_range(-0.03..0.03));
        let u = given_set(&tau_inf + &e, e.mapv(|v| 2.0 * v.abs()), &map);
        let model = model_on_support(&dist, u, map, &lp_config());
        assert!(model.solver.exact);
        let risk = exact_risk_finite(&model, &dist.support()).unwrap();
        let lower = model.lower_bound.unwrap();
        assert!(lower - 1e-9 <= risk && risk <= model.minimax_risk + 1e-9, "{lower} ≤ {risk} ≤ {}", model.minimax_risk);
    }
}

#[test]
fn larger_confidence_vector_never_lowers_the_minimax_risk() {
    let dist = FiniteDistribution::random(10, 2, 2, 7);
    let map = small_rff(2, 2, 3, 1);
    let tau = dist.expectation(&map);
    let mut prev = f64::NEG_INFINITY;
    for width in [0.0, 0.01, 0.05, 0.1, 0.3] {
        let u = given_set(tau.clone(), Array1::from_elem(map.dim(), width), &map);
        let model = model_on_support(&dist, u, map.clone(), &TrainConfig { lower_bound: false, ..lp_config() });
        assert!(model.minimax_risk >= prev - 1e-6);
        prev = model.minimax_risk;
    }
}

#[test]
fn rules_are_distributions_and_masses_stay_below_one() {
    let dist = FiniteDistribution::random(15, 2, 3, 5);
    let map = small_rff(2, 3, 4, 5);
    let tau = dist.expectation(&map);
    let u = given_set(tau, Array1::from_elem(map.dim(), 0.02), &map);
    let cfg = TrainConfig {
        solver: SolverConfig::new(Method::EasmRestart).with_max_iters(5000),
        lower_bound: false,
        ..TrainConfig::default()
    };
    let model = model_on_support(&dist, u, map, &cfg);
    for x in dist.instances.outer_iter() {
        let h = model.predict_proba(x).unwrap();
        assert!((h.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(h.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(model.positive_mass(x).unwrap() <= 1.0 + 1e-12);
        let yd = model.predict(x).unwrap();
        for y in 1..=3 {
            let hd = if y == yd { 1.0 } else { 0.0 };
            assert!(1.0 - hd <= 2.0 * (1.0 - h[y - 1]) + 1e-12);
        }
    }
}

#[test]
fn saved_model_predicts_identically() {
    let data = gaussian_blobs(80, 3, 3, 2.0, 4);
    let cfg = TrainConfig {
        solver: SolverConfig::new(Method::Easm).with_max_iters(3000),
        ..TrainConfig::default()
    };
    let model = classifier::train(&data, &FeatureConfig::rff(40, None, 2), &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let back = MrcModel::load(&path).unwrap();
    for x in data.instances().outer_iter() {
        let a = model.predict_proba(x).unwrap();
        let b = back.predict_proba(x).unwrap();
        assert!(a.iter().zip(&b).all(|(u, v)| u.to_bits() == v.to_bits()));
        assert_eq!(model.predict(x).unwrap(), back.predict(x).unwrap());
    }
    model.save(dir.path().join("again.json")).unwrap();
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(dir.path().join("again.json")).unwrap()
    );
}

#[test]
fn training_is_reproducible() {
    let data = gaussian_blobs(60, 2, 2, 1.5, 9);
    let cfg = TrainConfig {
        solver: SolverConfig::new(Method::EasmRestart).with_max_iters(2000).with_restart_period(500),
        ..TrainConfig::default()
    };
    let a = classifier::train(&data, &FeatureConfig::rff(30, None, 1), &cfg).unwrap();
    let b = classifier::train(&data, &FeatureConfig::rff(30, None, 1), &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn fixed_marginal_variant_trains_and_predicts() {
    let data = gaussian_blobs(60, 2, 3, 3.0, 2);
    let cfg = TrainConfig {
        variant: Variant::FixedMarginal,
        solver: SolverConfig::new(Method::Asm).with_max_iters(3000),
        lower_bound: false,
        ..TrainConfig::default()
    };
    let model = classifier::train(&data, &FeatureConfig::rff(30, None, 0), &cfg).unwrap();
    let eval = classifier::evaluate(&model, &data).unwrap();
    assert!(eval.deterministic_error < 0.5);
    for x in data.instances().outer_iter().take(10) {
        let h = model.fixed_marginal_proba(x).unwrap();
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn external_anchor_pool_is_used_and_recorded() {
    let data = gaussian_blobs(40, 2, 2, 2.0, 6);
    let pool = gaussian_blobs(25, 2, 2, 2.0, 7).instances().to_owned();
    let cfg = TrainConfig {
        anchor: Anchor::External {
            label: "pool".into(),
            instances: pool,
        },
        solver: SolverConfig::new(Method::Easm).with_max_iters(2000),
        ..TrainConfig::default()
    };
    let model = classifier::train(&data, &FeatureConfig::rff(20, None, 0), &cfg).unwrap();
    assert_eq!(model.anchor_source, "pool");
    assert_eq!(model.anchor.len(), 25);
    assert_eq!(model.solver.rows, 25 * 3);
}

#[test]
fn deterministic_rule_bounds_are_ordered() {
    let dist = FiniteDistribution::random(10, 2, 2, 12);
    let map = small_rff(2, 2, 3, 4);
    let u = given_set(dist.expectation(&map), Array1::from_elem(map.dim(), 0.05), &map);
    let model = model_on_support(&dist, u, map, &lp_config());
    let b = classifier::deterministic_bounds(&model, &SolverConfig::new(Method::Lp)).unwrap();
    assert!(b.lower <= b.upper + 1e-9);
    assert!(b.lower_solver.exact && b.upper_solver.exact);
    // The randomized rule is minimax, so its worst case is no worse.
    assert!(model.minimax_risk <= b.upper + 1e-7);
}

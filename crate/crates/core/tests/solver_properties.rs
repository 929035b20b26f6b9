mod common;

use ndarray::{array, Array1};

use mrc::solver::{solve, solve_lp, Method, SolverConfig};
use mrc::PiecewiseLinearProblem;

use common::random_problem;

fn iterates(problem: &PiecewiseLinearProblem, method: Method, iters: usize) -> Vec<Array1<f64>> {
    let mut cfg = SolverConfig::new(method).with_max_iters(iters);
    cfg.record_iterates = true;
    cfg.refresh_period = None;
    solve(problem, &cfg).unwrap().iterates
}

fn max_rel_diff(a: &[Array1<f64>], b: &[Array1<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let scale = x.iter().fold(1.0f64, |s, v| s.max(v.abs()));
            x.iter().zip(y).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max) / scale
        })
        .fold(0.0, f64::max)
}

#[test]
fn structured_methods_reproduce_plain_iterates() {
    for seed in 0..4 {
        let problem = random_problem(8, 40, seed);
        let asm = iterates(&problem, Method::Asm, 2000);
        let easm = iterates(&problem, Method::Easm, 2000);
        assert!(max_rel_diff(&asm, &easm) < 1e-9, "asm vs easm, seed {seed}");
        let bsm = iterates(&problem, Method::Bsm, 2000);
        let ebsm = iterates(&problem, Method::Ebsm, 2000);
        assert!(max_rel_diff(&bsm, &ebsm) < 1e-9, "bsm vs ebsm, seed {seed}");
    }
}

#[test]
fn exact_zero_components_take_the_half_column_branch() {
    // Columns 1 and 2 are zero, so those parameters stay exactly at zero while
    // the others move: sign changes of ±1 (0 → ±1) occur from the first step.
    // Start with component 0 at exactly zero and component 3 negative.
    let f = array![[1.0, 0.0, 0.0, -0.5], [-1.0, 0.0, 0.0, 0.5], [0.5, 0.0, 0.0, 1.0], [0.0, 0.0, 0.0, -1.0]];
    let problem = PiecewiseLinearProblem::new(
        array![0.1, 0.0, 0.0, -0.2],
        array![0.05, 0.0, 0.1, 0.02],
        f,
        array![0.0, -0.1, -0.3, -0.2],
        0.0,
    )
    .unwrap();
    for method in [Method::Asm, Method::Bsm] {
        let mut cfg = SolverConfig::new(method).with_max_iters(500).with_initial_mu(array![0.0, 0.0, 0.0, -0.3]);
        cfg.record_iterates = true;
        cfg.refresh_period = None;
        let plain = solve(&problem, &cfg).unwrap();
        let structured = solve(
            &problem,
            &SolverConfig {
                method: if method == Method::Asm { Method::Easm } else { Method::Ebsm },
                ..cfg.clone()
            },
        )
        .unwrap();
        assert!(plain.iterates.iter().all(|mu| mu[1] == 0.0 && mu[2] == 0.0), "{method}: {:?}", &plain.iterates[..3]);
        assert!(plain.iterates[1][0] != 0.0);
        assert!(max_rel_diff(&plain.iterates, &structured.iterates) < 1e-9);
        assert!((plain.best_value - structured.best_value).abs() < 1e-12);
    }
}

#[test]
fn best_value_never_increases_with_more_iterations() {
    let problem = random_problem(10, 60, 3);
    for method in [Method::Bsm, Method::Ebsm, Method::Asm, Method::Easm, Method::EasmRestart] {
        let mut prev = f64::INFINITY;
        for iters in [1, 10, 100, 1000, 5000] {
            let v = solve(&problem, &SolverConfig::new(method).with_max_iters(iters).with_restart_period(300)).unwrap().best_value;
            assert!(v <= prev, "{method}: {v} after {iters} > {prev}");
            prev = v;
        }
    }
}

#[test]
fn subgradient_values_never_beat_the_lp_optimum() {
    for seed in 0..5 {
        let problem = random_problem(12, 80, 100 + seed);
        let lp = solve_lp(&problem, &SolverConfig::new(Method::Lp)).unwrap();
        assert!(lp.exact);
        for method in [Method::Bsm, Method::Ebsm, Method::Asm, Method::Easm, Method::EasmRestart] {
            let run = solve(&problem, &SolverConfig::new(method).with_max_iters(20_000)).unwrap();
            assert!(run.best_value >= lp.best_value - 1e-9, "{method} below LP");
            assert!(run.best_value <= run.initial_value);
        }
    }
}

#[test]
fn restart_without_a_boundary_equals_plain_easm() {
    let problem = random_problem(10, 50, 8);
    let cfg = SolverConfig::new(Method::Easm).with_max_iters(3000).with_trace(50);
    let plain = solve(&problem, &cfg).unwrap();
    let restart = solve(
        &problem,
        &SolverConfig {
            method: Method::EasmRestart,
            restart_period: 3000,
            ..cfg.clone()
        },
    )
    .unwrap();
    assert_eq!(plain.best_mu, restart.best_mu);
    assert_eq!(plain.best_value, restart.best_value);
    let a: Vec<f64> = plain.trace.iter().map(|t| t.best_value).collect();
    let b: Vec<f64> = restart.trace.iter().map(|t| t.best_value).collect();
    assert_eq!(a, b);
}

#[test]
fn restarts_keep_the_best_value() {
    let problem = random_problem(10, 50, 9);
    let run = solve(&problem, &SolverConfig::new(Method::EasmRestart).with_max_iters(4000).with_restart_period(500).with_trace(1)).unwrap();
    for w in run.trace.windows(2) {
        assert!(w[1].best_value <= w[0].best_value);
    }
}

#[test]
fn all_methods_share_the_starting_value() {
    let problem = random_problem(6, 30, 2);
    let values: Vec<f64> = Method::ALL
        .iter()
        .map(|&m| solve(&problem, &SolverConfig::new(m).with_max_iters(10)).unwrap().initial_value)
        .collect();
    assert!(values.iter().all(|&v| v == values[0]));
    assert_eq!(values[0], problem.value(Array1::zeros(6).view()));
}

#[test]
fn lp_value_is_attained_by_its_parameters() {
    let problem = random_problem(5, 25, 31);
    let run = solve_lp(&problem, &SolverConfig::new(Method::Lp)).unwrap();
    assert!((problem.value(run.best_mu.view()) - run.best_value).abs() < 1e-9);
    // No nearby point does better.
    let mut r = common::rng(5);
    use rand::Rng;
    for _ in 0..2000 {
        let mu = &run.best_mu + &Array1::from_shape_fn(5, |_| r.gen_range(-0.05..0.05));
        assert!(problem.value(mu.view()) >= run.best_value - 1e-12);
    }
}

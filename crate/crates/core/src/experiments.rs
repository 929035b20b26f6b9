//! Experiment drivers: confidence-vector sweeps, reduced anchor sets, solver
//! benchmarks and kernel-scale selection.
//!
//! Independent runs execute on the rayon pool and are merged in grid order,
//! so results only depend on the inputs and the master seed.

use std::io::Write;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{self, epsilon_s, evaluate, Evaluation, FeatureConfig, MrcModel, TrainConfig};
use crate::dataset::{stratified_kfold, stratified_split_indices, Dataset, NormalizationStats};
use crate::error::{Error, Result};
use crate::estimate::{LambdaEstimator, UncertaintySet};
use crate::features::FeatureMap;
use crate::objective::{build_learning_problem, build_lower_bound_problem, PiecewiseLinearProblem};
use crate::solver::{self, Method, SolverConfig, SolverRun};

/// Seed of the `index`-th child run (SplitMix64 of the master seed and a counter).
pub fn child_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn csv_writer<W: Write>(writer: W) -> csv::Writer<W> {
    csv::Writer::from_writer(writer)
}

fn flush<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<csv>", e))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda0: f64,
    pub upper: f64,
    pub lower: f64,
    pub risk_rand: f64,
    pub err_det: f64,
}

/// Trains with `λ = λ₀√(υ/n)` for every grid value and averages bounds and
/// held-out errors over stratified folds.
pub fn sweep_lambda(
    data: &Dataset,
    features: &FeatureConfig,
    base: &TrainConfig,
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("lambda grid is empty".into()));
    }
    let splits = stratified_kfold(data, folds, seed)?;
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..splits.len()).map(move |f| (g, f))).collect();
    let results: Vec<Result<(f64, f64, Evaluation)>> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let config = TrainConfig {
                estimator: LambdaEstimator::Practical { lambda0: grid[g] },
                lower_bound: true,
                ..base.clone()
            };
            let train = data.subset(&splits[f].train);
            let test = data.subset(&splits[f].test);
            let model = classifier::train(&train, features, &config)?;
            let eval = evaluate(&model, &test)?;
            Ok((model.minimax_risk, model.lower_bound.unwrap_or(f64::NAN), eval))
        })
        .collect();
    let mut rows = Vec::with_capacity(grid.len());
    let mut results = results.into_iter();
    for &lambda0 in grid {
        let mut acc = [0.0; 4];
        for _ in 0..splits.len() {
            let (upper, lower, eval) = results.next().expect("one result per job")?;
            acc[0] += upper;
            acc[1] += lower;
            acc[2] += eval.randomized_risk;
            acc[3] += eval.deterministic_error;
        }
        let k = splits.len() as f64;
        rows.push(SweepRow {
            lambda0,
            upper: acc[0] / k,
            lower: acc[1] / k,
            risk_rand: acc[2] / k,
            err_det: acc[3] / k,
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["lambda0", "upper", "lower", "risk_rand", "err_det"])?;
    for r in rows {
        w.write_record([r.lambda0, r.upper, r.lower, r.risk_rand, r.err_det].map(|v| format!("{v}")))?;
    }
    flush(w)
}

/// Fixed uncertainty set and anchor pool for reduced-set studies, in
/// normalized coordinates.
pub struct ReductionSetup {
    pub uncertainty: UncertaintySet,
    pub map: FeatureMap,
    pub pool: Array2<f64>,
}

impl ReductionSetup {
    /// Estimates `τ`, `λ` on `train` and uses the (normalized) `pool` as anchor pool.
    pub fn new(train: &Dataset, pool: ArrayView2<'_, f64>, features: &FeatureConfig, estimator: &LambdaEstimator) -> Result<Self> {
        let norm = if features.normalize {
            NormalizationStats::fit(train.instances())?
        } else {
            NormalizationStats::identity(train.d())
        };
        let x = norm.apply_matrix(train.instances())?;
        let map = features.build(x.view(), train.num_classes())?;
        let uncertainty = UncertaintySet::estimate(&map, x.view(), train.labels(), estimator)?;
        Ok(Self {
            uncertainty,
            map,
            pool: norm.apply_matrix(pool)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReduceRow {
    pub s: usize,
    pub repetition: usize,
    pub upper: f64,
    pub lower: f64,
    pub gap: f64,
    pub epsilon_s: f64,
    /// Whether the set had to be widened to be nonempty on the subset.
    pub repaired: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReduceSummary {
    pub s: usize,
    pub median_gap: f64,
    pub mean_gap: f64,
    pub std_gap: f64,
    pub mean_upper: f64,
    pub std_upper: f64,
    pub epsilon_s: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReduceStudy {
    pub full_upper: f64,
    pub full_lower: f64,
    pub rows: Vec<ReduceRow>,
    pub summary: Vec<ReduceSummary>,
}

/// `R̄` and `R̲` of the set over `anchor`, repairing it first.
fn bounds_on_anchor(setup: &ReductionSetup, anchor: ArrayView2<'_, f64>, config: &SolverConfig) -> Result<(f64, f64, bool)> {
    let u = setup.uncertainty.repaired_for(anchor, &setup.map)?;
    let problem = build_learning_problem(&u, anchor, &setup.map)?;
    let run = solver::solve(&problem, config)?;
    let phi_star = crate::objective::phi(run.best_mu.view(), anchor, &setup.map)?;
    let psi = setup.map.scalar_matrix(anchor)?;
    let k = setup.map.num_classes();
    let mut h = Array2::zeros((anchor.nrows(), k));
    for (mut row, p) in h.outer_iter_mut().zip(psi.outer_iter()) {
        let scores = crate::features::class_scores(p, run.best_mu.view(), k);
        let (probs, _) = classifier::randomized_rule(&scores, phi_star);
        row.assign(&ndarray::Array1::from(probs));
    }
    let lower_problem = build_lower_bound_problem(&u, anchor, &setup.map, h.view())?;
    let lower = solver::solve(&lower_problem, config)?;
    Ok((run.best_value, lower_problem.reported(lower.best_value), u.provenance.repaired))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Solves with random anchor subsets of each size in `sizes` and compares
/// against the full pool.
pub fn reduce_study(
    setup: &ReductionSetup,
    sizes: &[usize],
    repetitions: usize,
    seed: u64,
    config: &SolverConfig,
    delta: f64,
) -> Result<ReduceStudy> {
    let pool_size = setup.pool.nrows();
    if let Some(&s) = sizes.iter().find(|&&s| s == 0 || s > pool_size) {
        return Err(Error::InvalidInput(format!("anchor size {s} outside 1..={pool_size}")));
    }
    if repetitions == 0 {
        return Err(Error::InvalidInput("at least one repetition is required".into()));
    }
    let (full_upper, full_lower, _) = bounds_on_anchor(setup, setup.pool.view(), config)?;
    let jobs: Vec<(usize, usize)> = sizes.iter().flat_map(|&s| (0..repetitions).map(move |r| (s, r))).collect();
    let m = setup.map.dim();
    let k = setup.map.num_classes();
    let rows: Vec<ReduceRow> = jobs
        .par_iter()
        .enumerate()
        .map(|(j, &(s, repetition))| {
            let mut order: Vec<usize> = (0..pool_size).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, j as u64));
            order.shuffle(&mut rng);
            order.truncate(s);
            order.sort_unstable();
            let anchor = setup.pool.select(Axis(0), &order);
            let (upper, lower, repaired) = bounds_on_anchor(setup, anchor.view(), config)?;
            Ok(ReduceRow {
                s,
                repetition,
                upper,
                lower,
                gap: (upper - full_upper).abs(),
                epsilon_s: epsilon_s(s, m, k, delta)?,
                repaired,
            })
        })
        .collect::<Result<_>>()?;
    let summary = sizes
        .iter()
        .map(|&s| {
            let mut gaps: Vec<f64> = rows.iter().filter(|r| r.s == s).map(|r| r.gap).collect();
            let uppers: Vec<f64> = rows.iter().filter(|r| r.s == s).map(|r| r.upper).collect();
            let (mean_gap, std_gap) = mean_std(&gaps);
            let (mean_upper, std_upper) = mean_std(&uppers);
            Ok(ReduceSummary {
                s,
                median_gap: median(&mut gaps),
                mean_gap,
                std_gap,
                mean_upper,
                std_upper,
                epsilon_s: epsilon_s(s, m, k, delta)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ReduceStudy {
        full_upper,
        full_lower,
        rows,
        summary,
    })
}

pub fn write_reduce_csv<W: Write>(study: &ReduceStudy, writer: W) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["s", "repetition", "upper", "lower", "gap", "epsilon_s", "repaired"])?;
    for r in &study.rows {
        w.write_record([
            r.s.to_string(),
            r.repetition.to_string(),
            r.upper.to_string(),
            r.lower.to_string(),
            r.gap.to_string(),
            r.epsilon_s.to_string(),
            r.repaired.to_string(),
        ])?;
    }
    flush(w)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchEntry {
    pub method: Method,
    pub iterations: usize,
    pub seconds: f64,
    pub seconds_per_iteration: f64,
    pub initial_value: f64,
    pub best_value: f64,
    /// `best_value − LP optimum` when the LP fits its budget.
    pub gap: Option<f64>,
    pub sparsity_gamma: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchResult {
    pub lp_optimum: Option<f64>,
    pub entries: Vec<BenchEntry>,
    #[serde(skip)]
    pub runs: Vec<SolverRun>,
}

/// Runs each method from the same starting point, sequentially so timings
/// are comparable.
pub fn bench_solvers(problem: &PiecewiseLinearProblem, methods: &[Method], config: &SolverConfig) -> Result<BenchResult> {
    let lp_optimum = if problem.num_rows() <= config.lp_budget.max_rows && problem.dim() <= config.lp_budget.max_dim {
        Some(solver::solve_lp(problem, config)?.best_value)
    } else {
        None
    };
    let mut runs = Vec::new();
    let mut entries = Vec::new();
    for &method in methods {
        let run = solver::solve(problem, &SolverConfig { method, ..config.clone() })?;
        entries.push(BenchEntry {
            method,
            iterations: run.iterations,
            seconds: run.elapsed_seconds,
            seconds_per_iteration: run.elapsed_seconds / run.iterations.max(1) as f64,
            initial_value: run.initial_value,
            best_value: run.best_value,
            gap: lp_optimum.map(|v| run.best_value - v),
            sparsity_gamma: run.sparsity_gamma,
        });
        runs.push(run);
    }
    Ok(BenchResult {
        lp_optimum,
        entries,
        runs,
    })
}

/// All traces in one table with a leading `method` column.
pub fn write_bench_traces<W: Write>(result: &BenchResult, writer: W) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["method", "iteration", "elapsed_seconds", "best_value", "gamma_running"])?;
    for run in &result.runs {
        for t in &run.trace {
            w.write_record([
                run.method.to_string(),
                t.iteration.to_string(),
                format!("{:.6}", t.elapsed_seconds),
                format!("{:.12}", t.best_value),
                format!("{:.6}", t.gamma_running),
            ])?;
        }
    }
    flush(w)
}

/// Linear-interpolation percentile of sorted values, `q ∈ [0, 100]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Instances used for pairwise distances in [`sigma_grid`].
pub const SIGMA_GRID_SAMPLE: usize = 2000;

/// `count` kernel scales evenly spaced between the 10th and 90th percentiles
/// of pairwise distances among (normalized) instances. Large sets are
/// subsampled to [`SIGMA_GRID_SAMPLE`] instances with `seed`.
pub fn sigma_grid(instances: ArrayView2<'_, f64>, count: usize, seed: u64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidInput("sigma grid needs at least one candidate".into()));
    }
    let n = instances.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    if n > SIGMA_GRID_SAMPLE {
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        idx.truncate(SIGMA_GRID_SAMPLE);
        idx.sort_unstable();
    }
    let mut dists = Vec::with_capacity(idx.len() * idx.len().saturating_sub(1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let d: f64 = instances
                .row(i)
                .iter()
                .zip(instances.row(j))
                .map(|(x, y)| (x - y).powi(2))
                .sum();
            dists.push(d.sqrt());
        }
    }
    if dists.is_empty() {
        return Err(Error::InvalidInput("sigma grid needs at least two instances".into()));
    }
    dists.sort_by(f64::total_cmp);
    let lo = percentile(&dists, 10.0);
    let hi = percentile(&dists, 90.0);
    if !(hi > 0.0) {
        return Err(Error::InvalidInput("pairwise distances are all zero; cannot build a sigma grid".into()));
    }
    let lo = if lo > 0.0 { lo } else { hi / count as f64 };
    if count == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Candidate {
    pub sigma: f64,
    pub upper: f64,
}

pub struct Selection {
    pub sigma: f64,
    pub model: MrcModel,
    pub candidates: Vec<Candidate>,
}

/// Trains one model per kernel scale and keeps the one with the smallest
/// minimax risk, ties toward the smaller scale. The lower bound is solved
/// only for the selected model.
pub fn model_select(train: &Dataset, features: &FeatureConfig, config: &TrainConfig, sigmas: &[f64]) -> Result<Selection> {
    if sigmas.is_empty() {
        return Err(Error::InvalidInput("sigma grid is empty".into()));
    }
    let mut order: Vec<f64> = sigmas.to_vec();
    order.sort_by(f64::total_cmp);
    let quiet = TrainConfig {
        lower_bound: false,
        ..config.clone()
    };
    let models: Vec<MrcModel> = order
        .par_iter()
        .map(|&sigma| {
            let f = FeatureConfig {
                sigma: Some(sigma),
                ..features.clone()
            };
            classifier::train(train, &f, &quiet)
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, m) in models.iter().enumerate() {
        if m.minimax_risk < models[best].minimax_risk {
            best = i;
        }
    }
    let candidates = order
        .iter()
        .zip(&models)
        .map(|(&sigma, m)| Candidate {
            sigma,
            upper: m.minimax_risk,
        })
        .collect();
    let mut model = models.into_iter().nth(best).expect("nonempty");
    if config.lower_bound {
        classifier::solve_lower_bound(&mut model, &config.solver)?;
    }
    Ok(Selection {
        sigma: order[best],
        model,
        candidates,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub split: usize,
    pub seed: u64,
    pub sigma: f64,
    pub upper: f64,
    pub lower: Option<f64>,
    pub test: Evaluation,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelectionProtocol {
    pub splits: Vec<SplitOutcome>,
    pub mean_det_error: f64,
    pub std_det_error: f64,
    pub mean_rand_risk: f64,
    pub mean_upper: f64,
}

/// Repeated stratified splits with kernel-scale selection on each training
/// part; the grid is built from the normalized training instances.
pub fn selection_protocol(
    data: &Dataset,
    features: &FeatureConfig,
    config: &TrainConfig,
    splits: usize,
    test_fraction: f64,
    grid_size: usize,
    seed: u64,
) -> Result<SelectionProtocol> {
    if splits == 0 {
        return Err(Error::InvalidInput("at least one split is required".into()));
    }
    let mut outcomes = Vec::with_capacity(splits);
    for split in 0..splits {
        let split_seed = child_seed(seed, split as u64);
        let parts = stratified_split_indices(data, test_fraction, split_seed)?;
        let train = data.subset(&parts.train);
        let test = data.subset(&parts.test);
        let x = if features.normalize {
            NormalizationStats::fit(train.instances())?.apply_matrix(train.instances())?
        } else {
            train.instances().to_owned()
        };
        let grid = sigma_grid(x.view(), grid_size, split_seed)?;
        let selection = model_select(&train, features, config, &grid)?;
        let eval = evaluate(&selection.model, &test)?;
        log::info!(
            "split {split}: sigma {:.4}, upper {:.4}, test error {:.4}",
            selection.sigma,
            selection.model.minimax_risk,
            eval.deterministic_error
        );
        outcomes.push(SplitOutcome {
            split,
            seed: split_seed,
            sigma: selection.sigma,
            upper: selection.model.minimax_risk,
            lower: selection.model.lower_bound,
            test: eval,
        });
    }
    let det: Vec<f64> = outcomes.iter().map(|o| o.test.deterministic_error).collect();
    let (mean_det_error, std_det_error) = mean_std(&det);
    let n = outcomes.len() as f64;
    Ok(SelectionProtocol {
        mean_rand_risk: outcomes.iter().map(|o| o.test.randomized_risk).sum::<f64>() / n,
        mean_upper: outcomes.iter().map(|o| o.upper).sum::<f64>() / n,
        splits: outcomes,
        mean_det_error,
        std_det_error,
    })
}

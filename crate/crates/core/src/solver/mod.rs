//! Subgradient methods and an exact LP path for piecewise-linear objectives
//!
//! BSM and ASM work on any [`ConvexObjective`]. E-BSM, E-ASM and E-ASM-R need
//! the materialized rows of a [`PiecewiseLinearProblem`]: they keep
//! `v = Fμ + b` up to date from the precomputed `α = Fa`, `G = FFᵀ` and
//! `H = 2F·diag(λ)` instead of multiplying by `F` at every iteration.

pub mod lp;

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{argmax_first, assemble_subgradient, linear_and_penalty, sign, ConvexObjective, PiecewiseLinearProblem};
use lp::{LinearProgram, Relation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bsm,
    Ebsm,
    Asm,
    Easm,
    EasmRestart,
    Lp,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Bsm, Method::Ebsm, Method::Asm, Method::Easm, Method::EasmRestart, Method::Lp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bsm => "bsm",
            Method::Ebsm => "ebsm",
            Method::Asm => "asm",
            Method::Easm => "easm",
            Method::EasmRestart => "easm-restart",
            Method::Lp => "lp",
        }
    }

    /// Whether the method needs a materialized `F`.
    pub fn needs_rows(self) -> bool {
        !matches!(self, Method::Bsm | Method::Asm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "bsm" => Ok(Method::Bsm),
            "ebsm" | "e-bsm" => Ok(Method::Ebsm),
            "asm" => Ok(Method::Asm),
            "easm" | "e-asm" => Ok(Method::Easm),
            "easm-restart" | "easm-r" | "e-asm-r" => Ok(Method::EasmRestart),
            "lp" => Ok(Method::Lp),
            other => Err(Error::InvalidInput(format!("unknown solver '{other}'"))),
        }
    }
}

/// What a restart of E-ASM-R resets besides the iterate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartPolicy {
    /// Step size and extrapolation both start over (`k ← 1`).
    #[default]
    Full,
    /// Extrapolation starts over; the step size keeps decaying with the
    /// total iteration count.
    KeepStep,
}

/// Stop when the best value improved by less than `tolerance` over the last
/// `window` iterations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub tolerance: f64,
    pub window: usize,
}

/// Size limits for the exact LP path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpBudget {
    pub max_rows: usize,
    pub max_dim: usize,
}

impl Default for LpBudget {
    fn default() -> Self {
        Self {
            max_rows: 2000,
            max_dim: 500,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub max_iters: usize,
    pub restart_period: usize,
    #[serde(default)]
    pub restart_policy: RestartPolicy,
    /// Starting point; zero when absent.
    #[serde(with = "crate::array_serde::option", default)]
    pub initial_mu: Option<Array1<f64>>,
    pub record_trace: bool,
    pub trace_every: usize,
    /// Keep every iterate `μ_k` in [`SolverRun::iterates`] (tests, small runs).
    #[serde(default)]
    pub record_iterates: bool,
    pub early_stop: Option<EarlyStop>,
    /// Objective values below this are reported as divergence.
    pub divergence_floor: f64,
    /// Memory allowed for `G = FFᵀ`.
    pub precompute_budget_bytes: usize,
    /// Exact recomputation of the maintained row values every this many
    /// iterations (E-BSM and E-ASM only).
    pub refresh_period: Option<usize>,
    pub lp_budget: LpBudget,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::EasmRestart,
            max_iters: 200_000,
            restart_period: 10_000,
            restart_policy: RestartPolicy::Full,
            initial_mu: None,
            record_trace: false,
            trace_every: 100,
            record_iterates: false,
            early_stop: None,
            divergence_floor: -1e6,
            precompute_budget_bytes: 1 << 30,
            refresh_period: Some(100_000),
            lp_budget: LpBudget::default(),
        }
    }
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_restart_period(mut self, period: usize) -> Self {
        self.restart_period = period;
        self
    }

    pub fn with_trace(mut self, every: usize) -> Self {
        self.record_trace = true;
        self.trace_every = every.max(1);
        self
    }

    pub fn with_initial_mu(mut self, mu: Array1<f64>) -> Self {
        self.initial_mu = Some(mu);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        if self.restart_period == 0 {
            return Err(Error::InvalidInput("restart_period must be at least 1".into()));
        }
        if let Some(stop) = self.early_stop {
            if stop.window == 0 || !(stop.tolerance >= 0.0) {
                return Err(Error::InvalidInput("early stop needs a positive window and a nonnegative tolerance".into()));
            }
        }
        Ok(())
    }

    fn start(&self, dim: usize) -> Result<Array1<f64>> {
        match &self.initial_mu {
            None => Ok(Array1::zeros(dim)),
            Some(mu) if mu.len() == dim => Ok(mu.clone()),
            Some(mu) => Err(Error::DimensionMismatch {
                expected: dim,
                found: mu.len(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub elapsed_seconds: f64,
    pub best_value: f64,
    pub gamma_running: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverRun {
    pub method: Method,
    #[serde(with = "crate::array_serde")]
    pub best_mu: Array1<f64>,
    /// Best objective value, constant included.
    pub best_value: f64,
    /// Objective value at the starting point, constant included.
    pub initial_value: f64,
    /// Iterations run (simplex pivots for the LP path).
    pub iterations: usize,
    pub trace: Vec<TracePoint>,
    /// `μ_1, μ_2, …` when requested.
    #[serde(skip)]
    pub iterates: Vec<Array1<f64>>,
    /// Average fraction of components whose sign changed per iteration.
    pub sparsity_gamma: f64,
    /// True when the value comes from the exact LP path.
    pub exact: bool,
    /// Largest deviation between maintained and recomputed row values.
    pub max_drift: Option<f64>,
    pub elapsed_seconds: f64,
}

/// Writes a trace as CSV with the columns
/// `iteration,elapsed_seconds,best_value,gamma_running`.
pub fn write_trace_csv<W: Write>(trace: &[TracePoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iteration", "elapsed_seconds", "best_value", "gamma_running"])?;
    for t in trace {
        w.write_record([
            t.iteration.to_string(),
            format!("{:.6}", t.elapsed_seconds),
            format!("{:.12}", t.best_value),
            format!("{:.6}", t.gamma_running),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<trace>", e))?;
    Ok(())
}

/// Subgradient `a + λ ⊙ sign(μ) + F[i(μ), :]`.
pub fn subgradient(problem: &PiecewiseLinearProblem, mu: ArrayView1<'_, f64>) -> Array1<f64> {
    problem.subgradient(mu).0
}

/// Step-size and extrapolation schedule of the accelerated method.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsmSchedule {
    pub k: usize,
    pub c: f64,
    pub theta: f64,
    pub eta: f64,
    /// Added to `k` in the step size only.
    pub step_offset: usize,
}

impl Default for AsmSchedule {
    fn default() -> Self {
        Self {
            k: 1,
            c: 1.0,
            theta: 1.0,
            eta: 0.0,
            step_offset: 0,
        }
    }
}

impl AsmSchedule {
    /// Fresh extrapolation with the step size continuing after `done` iterations.
    pub fn continuing(done: usize) -> Self {
        Self {
            c: ((1 + done) as f64).powf(-1.5),
            step_offset: done,
            ..Self::default()
        }
    }

    /// Advances from `k` to `k + 1`.
    pub fn advance(&mut self) {
        let next = (self.k + 1) as f64;
        let theta = 2.0 / next;
        self.eta = theta * (1.0 / self.theta - 1.0);
        self.theta = theta;
        self.c = ((self.k + 1 + self.step_offset) as f64).powf(-1.5);
        self.k += 1;
    }
}

/// `d += ½ Σ_j Δ_j col_j(H)` where row `j` of `h_t` holds `col_j(H)`.
/// Returns the number of nonzero entries of `Δ`.
pub fn update_d(d: &mut [f64], h_t: &Array2<f64>, delta: &[f64]) -> usize {
    let mut changed = 0;
    for (j, &dj) in delta.iter().enumerate() {
        if dj != 0.0 {
            changed += 1;
            let scale = 0.5 * dj;
            for (x, h) in d.iter_mut().zip(h_t.row(j)) {
                *x += scale * h;
            }
        }
    }
    changed
}

/// Best-so-far bookkeeping shared by the iterative methods.
struct Progress<'a> {
    config: &'a SolverConfig,
    offset: f64,
    started: Instant,
    best_mu: Array1<f64>,
    best_raw: f64,
    trace: Vec<TracePoint>,
    iterates: Vec<Array1<f64>>,
    sign_changes: usize,
    steps: usize,
    dim: usize,
    last_improvement: (usize, f64),
}

impl<'a> Progress<'a> {
    fn new(config: &'a SolverConfig, offset: f64, mu: &Array1<f64>, raw: f64) -> Result<Self> {
        let mut p = Self {
            config,
            offset,
            started: Instant::now(),
            best_mu: mu.clone(),
            best_raw: raw,
            trace: Vec::new(),
            iterates: Vec::new(),
            sign_changes: 0,
            steps: 0,
            dim: mu.len().max(1),
            last_improvement: (0, raw),
        };
        p.check(0, raw)?;
        p.record(0);
        if config.record_iterates {
            p.iterates.push(mu.clone());
        }
        Ok(p)
    }

    fn gamma(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.sign_changes as f64 / (self.steps as f64 * self.dim as f64)
        }
    }

    fn check(&self, iteration: usize, raw: f64) -> Result<()> {
        let value = raw + self.offset;
        if !value.is_finite() || value < self.config.divergence_floor {
            return Err(Error::Divergence { iteration, value });
        }
        Ok(())
    }

    fn record(&mut self, iteration: usize) {
        if self.config.record_trace {
            self.trace.push(TracePoint {
                iteration,
                elapsed_seconds: self.started.elapsed().as_secs_f64(),
                best_value: self.best_raw + self.offset,
                gamma_running: self.gamma(),
            });
        }
    }

    /// Registers the value at iteration `k`; returns true when the early-stop
    /// window says to stop.
    fn step(&mut self, k: usize, mu: &Array1<f64>, raw: f64, changed: usize) -> Result<bool> {
        self.check(k, raw)?;
        self.steps += 1;
        self.sign_changes += changed;
        if self.config.record_iterates {
            self.iterates.push(mu.clone());
        }
        if raw < self.best_raw {
            self.best_raw = raw;
            self.best_mu.assign(mu);
        }
        if self.config.record_trace && k % self.config.trace_every == 0 {
            self.record(k);
        }
        if let Some(stop) = self.config.early_stop {
            if self.last_improvement.1 - self.best_raw > stop.tolerance {
                self.last_improvement = (k, self.best_raw);
            } else if k - self.last_improvement.0 >= stop.window {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn finish(mut self, method: Method, iterations: usize, initial_raw: f64, max_drift: Option<f64>) -> SolverRun {
        if self.config.record_trace && self.trace.last().map(|t| t.iteration) != Some(iterations) {
            self.record(iterations);
        }
        SolverRun {
            method,
            best_value: self.best_raw + self.offset,
            initial_value: initial_raw + self.offset,
            iterations,
            sparsity_gamma: self.gamma(),
            trace: self.trace,
            iterates: self.iterates,
            exact: false,
            max_drift,
            elapsed_seconds: self.started.elapsed().as_secs_f64(),
            best_mu: self.best_mu,
        }
    }
}

fn count_sign_changes(old: &[f64], new: ArrayView1<'_, f64>, delta: &mut [f64]) -> usize {
    let mut changed = 0;
    for ((d, &s), &m) in delta.iter_mut().zip(old).zip(new.iter()) {
        *d = sign(m) - s;
        if *d != 0.0 {
            changed += 1;
        }
    }
    changed
}

fn norm(v: &Array1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Basic subgradient method with step `1/(√(k+1)‖g_k‖)`.
pub fn solve_bsm<O: ConvexObjective + ?Sized>(objective: &O, config: &SolverConfig) -> Result<SolverRun> {
    config.validate()?;
    let m = objective.dim();
    let mut mu = config.start(m)?;
    let mut g = Array1::zeros(m);
    let mut raw = objective.evaluate(mu.view(), &mut g);
    let initial = raw;
    let mut progress = Progress::new(config, objective.offset(), &mu, raw)?;
    let mut signs: Vec<f64> = mu.iter().map(|&x| sign(x)).collect();
    let mut delta = vec![0.0; m];
    let mut iterations = config.max_iters;
    for k in 1..=config.max_iters {
        let gn = norm(&g);
        if gn == 0.0 {
            iterations = k;
            break;
        }
        let c = 1.0 / (((k + 1) as f64).sqrt() * gn);
        mu.scaled_add(-c, &g);
        let changed = count_sign_changes(&signs, mu.view(), &mut delta);
        for (s, &x) in signs.iter_mut().zip(mu.iter()) {
            *s = sign(x);
        }
        raw = objective.evaluate(mu.view(), &mut g);
        if progress.step(k, &mu, raw, changed)? {
            iterations = k;
            break;
        }
    }
    Ok(progress.finish(Method::Bsm, iterations, initial, None))
}

/// Accelerated subgradient method with schedule `c_{k+1} = (k+1)^{-3/2}`,
/// `θ_{k+1} = 2/(k+1)`, `η_{k+1} = θ_{k+1}(1/θ_k − 1)`.
pub fn solve_asm<O: ConvexObjective + ?Sized>(objective: &O, config: &SolverConfig) -> Result<SolverRun> {
    config.validate()?;
    let m = objective.dim();
    let mut mu = config.start(m)?;
    let mut y = mu.clone();
    let mut y_next = Array1::zeros(m);
    let mut g = Array1::zeros(m);
    let mut raw = objective.evaluate(mu.view(), &mut g);
    let initial = raw;
    let mut progress = Progress::new(config, objective.offset(), &mu, raw)?;
    let mut schedule = AsmSchedule::default();
    let mut signs: Vec<f64> = mu.iter().map(|&x| sign(x)).collect();
    let mut delta = vec![0.0; m];
    let mut iterations = config.max_iters;
    for k in 1..=config.max_iters {
        asm_step(&mut mu, &mut y, &mut y_next, &g, &schedule);
        schedule.advance();
        let changed = count_sign_changes(&signs, mu.view(), &mut delta);
        for (s, &x) in signs.iter_mut().zip(mu.iter()) {
            *s = sign(x);
        }
        raw = objective.evaluate(mu.view(), &mut g);
        if progress.step(k, &mu, raw, changed)? {
            iterations = k;
            break;
        }
    }
    Ok(progress.finish(Method::Asm, iterations, initial, None))
}

/// `y_{k+1} = μ_k − c_k g_k`, `μ_{k+1} = (1 + η_k) y_{k+1} − η_k y_k`; on
/// return `y` holds `y_{k+1}`.
#[inline]
fn asm_step(mu: &mut Array1<f64>, y: &mut Array1<f64>, y_next: &mut Array1<f64>, g: &Array1<f64>, s: &AsmSchedule) {
    let (c, eta) = (s.c, s.eta);
    ndarray::Zip::from(&mut *y_next)
        .and(&*mu)
        .and(g)
        .for_each(|yn, &m, &g| *yn = m - c * g);
    ndarray::Zip::from(&mut *mu)
        .and(&*y_next)
        .and(&*y)
        .for_each(|m, &yn, &yo| *m = (1.0 + eta) * yn - eta * yo);
    std::mem::swap(y, y_next);
}

/// Quantities precomputed once per problem for the structured methods.
pub struct Precomputed {
    /// `α = Fa`
    pub alpha: Array1<f64>,
    /// `G = FFᵀ`
    pub gram: Array2<f64>,
    /// `Hᵀ` with `H = 2F·diag(λ)`; row `j` is column `j` of `H`.
    pub h_t: Array2<f64>,
}

impl Precomputed {
    pub fn new(problem: &PiecewiseLinearProblem, budget_bytes: usize) -> Result<Self> {
        let p = problem.num_rows();
        let needed = p.saturating_mul(p).saturating_mul(std::mem::size_of::<f64>());
        if needed > budget_bytes {
            return Err(Error::BudgetExceeded(format!(
                "G = FFᵀ needs {needed} bytes for p = {p} rows, budget is {budget_bytes}; use asm or bsm instead"
            )));
        }
        let alpha = problem.f.dot(&problem.a);
        let gram = problem.gram();
        let mut h_t = problem.f.t().as_standard_layout().into_owned();
        for (mut row, &l) in h_t.outer_iter_mut().zip(&problem.lambda) {
            row *= 2.0 * l;
        }
        Ok(Self { alpha, gram, h_t })
    }

    /// `d = ½ H sign(μ)`
    fn d_for(&self, signs: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.alpha.len()];
        update_d(&mut d, &self.h_t, signs);
        d
    }
}

/// Solves a materialized problem with the configured method.
pub fn solve(problem: &PiecewiseLinearProblem, config: &SolverConfig) -> Result<SolverRun> {
    match config.method {
        Method::Bsm => solve_bsm(problem, config),
        Method::Asm => solve_asm(problem, config),
        Method::Ebsm => solve_ebsm(problem, config),
        Method::Easm => solve_easm(problem, config),
        Method::EasmRestart => solve_easm_restart(problem, config),
        Method::Lp => solve_lp(problem, config),
    }
}

/// Solves a general objective; only BSM and ASM apply.
pub fn minimize<O: ConvexObjective + ?Sized>(objective: &O, config: &SolverConfig) -> Result<SolverRun> {
    match config.method {
        Method::Bsm => solve_bsm(objective, config),
        Method::Asm => solve_asm(objective, config),
        other => Err(Error::InvalidInput(format!(
            "solver {other} needs materialized rows; use bsm or asm for this objective"
        ))),
    }
}

fn value_parts(problem: &PiecewiseLinearProblem, mu: &Array1<f64>, v: &[f64]) -> (f64, usize) {
    let i = argmax_first(v);
    (linear_and_penalty(problem.a.view(), problem.lambda.view(), mu.view()) + v[i], i)
}

fn exact_rows(problem: &PiecewiseLinearProblem, x: &Array1<f64>) -> Vec<f64> {
    problem.row_values(x.view()).to_vec()
}

fn drift(maintained: &[f64], exact: &[f64]) -> f64 {
    maintained
        .iter()
        .zip(exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// BSM with the row values maintained from `α`, `G` and `H`.
pub fn solve_ebsm(problem: &PiecewiseLinearProblem, config: &SolverConfig) -> Result<SolverRun> {
    config.validate()?;
    let pre = Precomputed::new(problem, config.precompute_budget_bytes)?;
    let m = problem.dim();
    let mut mu = config.start(m)?;
    let mut signs: Vec<f64> = mu.iter().map(|&x| sign(x)).collect();
    let mut v = exact_rows(problem, &mu);
    let mut d = pre.d_for(&signs);
    let (mut raw, mut i) = value_parts(problem, &mu, &v);
    let initial = raw;
    let mut progress = Progress::new(config, problem.constant, &mu, raw)?;
    let mut g = Array1::zeros(m);
    let mut delta = vec![0.0; m];
    let mut max_drift: Option<f64> = None;
    let mut iterations = config.max_iters;
    for k in 1..=config.max_iters {
        let s_view = ArrayView1::from(&signs[..]);
        assemble_subgradient(problem.a.view(), problem.lambda.view(), s_view, problem.f.row(i), &mut g);
        let gn = norm(&g);
        if gn == 0.0 {
            iterations = k;
            break;
        }
        let c = 1.0 / (((k + 1) as f64).sqrt() * gn);
        mu.scaled_add(-c, &g);
        let grow = pre.gram.row(i);
        for (((vj, &aj), &dj), &gj) in v.iter_mut().zip(&pre.alpha).zip(&d).zip(grow) {
            *vj -= c * (aj + dj + gj);
        }
        let changed = count_sign_changes(&signs, mu.view(), &mut delta);
        if changed > 0 {
            update_d(&mut d, &pre.h_t, &delta);
            for (s, &x) in signs.iter_mut().zip(mu.iter()) {
                *s = sign(x);
            }
        }
        if config.refresh_period.is_some_and(|r| k % r == 0) {
            let exact = exact_rows(problem, &mu);
            max_drift = Some(max_drift.unwrap_or(0.0).max(drift(&v, &exact)));
            v = exact;
            d = pre.d_for(&signs);
        }
        (raw, i) = value_parts(problem, &mu, &v);
        if progress.step(k, &mu, raw, changed)? {
            iterations = k;
            break;
        }
    }
    Ok(progress.finish(Method::Ebsm, iterations, initial, max_drift))
}

/// State of one E-ASM segment.
struct EasmState {
    mu: Array1<f64>,
    y: Array1<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
    d: Vec<f64>,
    signs: Vec<f64>,
    i: usize,
    raw: f64,
}

impl EasmState {
    fn start(problem: &PiecewiseLinearProblem, pre: &Precomputed, mu: Array1<f64>) -> Self {
        let signs: Vec<f64> = mu.iter().map(|&x| sign(x)).collect();
        let v = exact_rows(problem, &mu);
        let d = pre.d_for(&signs);
        let (raw, i) = value_parts(problem, &mu, &v);
        Self {
            y: mu.clone(),
            w: v.clone(),
            v,
            d,
            signs,
            i,
            raw,
            mu,
        }
    }
}

/// Runs `iters` E-ASM iterations from `state`, numbering them from `k0 + 1`.
/// Returns the number of iterations done and whether early stop fired.
///
/// The parameter update, sign tracking and penalty evaluation share one pass
/// over the `m` components, and the row recursions share one pass over the
/// `p` rows; the arithmetic matches [`solve_asm`] operation by operation.
#[allow(clippy::too_many_arguments)]
fn easm_segment(
    problem: &PiecewiseLinearProblem,
    pre: &Precomputed,
    config: &SolverConfig,
    state: &mut EasmState,
    progress: &mut Progress<'_>,
    k0: usize,
    iters: usize,
    max_drift: &mut Option<f64>,
) -> Result<(usize, bool)> {
    let a = problem.a.as_slice().expect("contiguous");
    let lambda = problem.lambda.as_slice().expect("contiguous");
    let alpha = pre.alpha.as_slice().expect("contiguous");
    let mut changes: Vec<(usize, f64)> = Vec::new();
    let mut schedule = match config.restart_policy {
        RestartPolicy::Full => AsmSchedule::default(),
        RestartPolicy::KeepStep => AsmSchedule::continuing(k0),
    };
    for step in 1..=iters {
        let k = k0 + step;
        let (c, eta) = (schedule.c, schedule.eta);
        let frow = problem.f.row(state.i);
        let frow = frow.as_slice().expect("contiguous");
        let mu = state.mu.as_slice_mut().expect("contiguous");
        let y = state.y.as_slice_mut().expect("contiguous");
        changes.clear();
        let mut linear = 0.0;
        for (j, ((((m, yj), s), (&aj, &lj)), &fj)) in mu
            .iter_mut()
            .zip(y.iter_mut())
            .zip(state.signs.iter_mut())
            .zip(a.iter().zip(lambda))
            .zip(frow)
            .enumerate()
        {
            let g = aj + lj * *s + fj;
            let yn = *m - c * g;
            let mn = (1.0 + eta) * yn - eta * *yj;
            *yj = yn;
            *m = mn;
            let sn = sign(mn);
            if sn != *s {
                changes.push((j, sn - *s));
                *s = sn;
            }
            linear += aj * mn + lj * mn.abs();
        }
        // w_{k+1} = v_k − c_k u_k with u_k = α + d_k + col_{i_k}(G),
        // v_{k+1} = (1 + η_k) w_{k+1} − η_k w_k
        let grow = pre.gram.row(state.i);
        let grow = grow.as_slice().expect("contiguous");
        let mut top = f64::NEG_INFINITY;
        let mut arg = 0;
        for (r, ((((vr, wr), &ar), &dr), &gr)) in state
            .v
            .iter_mut()
            .zip(state.w.iter_mut())
            .zip(alpha)
            .zip(&state.d)
            .zip(grow)
            .enumerate()
        {
            let wn = *vr - c * (ar + dr + gr);
            let vn = (1.0 + eta) * wn - eta * *wr;
            *wr = wn;
            *vr = vn;
            if vn > top {
                top = vn;
                arg = r;
            }
        }
        for &(j, dj) in &changes {
            let scale = 0.5 * dj;
            for (x, h) in state.d.iter_mut().zip(pre.h_t.row(j)) {
                *x += scale * h;
            }
        }
        schedule.advance();
        state.i = arg;
        state.raw = linear + top;
        if config.refresh_period.is_some_and(|r| k % r == 0) {
            let exact_v = exact_rows(problem, &state.mu);
            let exact_w = exact_rows(problem, &state.y);
            let worst = drift(&state.v, &exact_v).max(drift(&state.w, &exact_w));
            *max_drift = Some(max_drift.unwrap_or(0.0).max(worst));
            state.v = exact_v;
            state.w = exact_w;
            state.d = pre.d_for(&state.signs);
            (state.raw, state.i) = value_parts(problem, &state.mu, &state.v);
        }
        if progress.step(k, &state.mu, state.raw, changes.len())? {
            return Ok((step, true));
        }
    }
    Ok((iters, false))
}

/// Accelerated method with row values maintained from `α`, `G` and `H`.
/// Produces the same iterates as [`solve_asm`].
pub fn solve_easm(problem: &PiecewiseLinearProblem, config: &SolverConfig) -> Result<SolverRun> {
    run_easm(problem, config, config.max_iters, Method::Easm)
}

/// E-ASM restarted from the best point every `restart_period` iterations.
pub fn solve_easm_restart(problem: &PiecewiseLinearProblem, config: &SolverConfig) -> Result<SolverRun> {
    run_easm(problem, config, config.restart_period, Method::EasmRestart)
}

fn run_easm(problem: &PiecewiseLinearProblem, config: &SolverConfig, period: usize, method: Method) -> Result<SolverRun> {
    config.validate()?;
    let pre = Precomputed::new(problem, config.precompute_budget_bytes)?;
    let mut state = EasmState::start(problem, &pre, config.start(problem.dim())?);
    let initial = state.raw;
    let mut progress = Progress::new(config, problem.constant, &state.mu, state.raw)?;
    let mut max_drift = None;
    let mut done = 0;
    while done < config.max_iters {
        if done > 0 {
            state = EasmState::start(problem, &pre, progress.best_mu.clone());
        }
        let iters = period.min(config.max_iters - done);
        let (ran, stopped) = easm_segment(problem, &pre, config, &mut state, &mut progress, done, iters, &mut max_drift)?;
        done += ran;
        if stopped {
            break;
        }
    }
    Ok(progress.finish(method, done, initial, max_drift))
}

/// Exact minimum through the LP dual
///
/// ```text
/// min −bᵀq  s.t.  1ᵀq = 1,  Fᵀq ⪯ λ − a,  −Fᵀq ⪯ λ + a,  q ⪰ 0
/// ```
///
/// whose multipliers give `μ = π⁺ − π⁻`. An infeasible dual means the
/// objective is unbounded below.
pub fn solve_lp(problem: &PiecewiseLinearProblem, config: &SolverConfig) -> Result<SolverRun> {
    let p = problem.num_rows();
    let m = problem.dim();
    let budget = config.lp_budget;
    if p > budget.max_rows || m > budget.max_dim {
        return Err(Error::BudgetExceeded(format!(
            "exact LP limited to p ≤ {} rows and m ≤ {} parameters, got p = {p}, m = {m}",
            budget.max_rows, budget.max_dim
        )));
    }
    let started = Instant::now();
    let mut lp = LinearProgram::new(problem.b.iter().map(|b| -b).collect());
    lp.add_constraint(vec![1.0; p], Relation::Eq, 1.0)?;
    for k in 0..m {
        let col: Vec<f64> = problem.f.column(k).to_vec();
        let neg: Vec<f64> = col.iter().map(|x| -x).collect();
        lp.add_constraint(col, Relation::Le, problem.lambda[k] - problem.a[k])?;
        lp.add_constraint(neg, Relation::Le, problem.lambda[k] + problem.a[k])?;
    }
    let solution = match lp.solve() {
        Ok(s) => s,
        Err(Error::Infeasible) => return Err(Error::Unbounded),
        Err(e) => return Err(e),
    };
    let mu = Array1::from_iter((0..m).map(|k| solution.duals[1 + 2 * k] - solution.duals[2 + 2 * k]));
    let value = problem.value(mu.view());
    let lp_value = problem.constant - solution.objective;
    if (value - lp_value).abs() > 1e-7 * (1.0 + lp_value.abs()) {
        log::warn!("LP multipliers give f = {value}, dual optimum is {lp_value}");
    }
    let initial_mu = config.start(m)?;
    let elapsed = started.elapsed().as_secs_f64();
    Ok(SolverRun {
        method: Method::Lp,
        best_mu: mu,
        best_value: value,
        initial_value: problem.value(initial_mu.view()),
        iterations: solution.pivots,
        trace: if config.record_trace {
            vec![TracePoint {
                iteration: solution.pivots,
                elapsed_seconds: elapsed,
                best_value: value,
                gamma_running: 0.0,
            }]
        } else {
            Vec::new()
        },
        iterates: Vec::new(),
        sparsity_gamma: 0.0,
        exact: true,
        max_drift: None,
        elapsed_seconds: elapsed,
    })
}

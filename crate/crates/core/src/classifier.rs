//! Training, prediction and error bounds for minimax risk classifiers.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::array_serde;
use crate::dataset::{Dataset, NormalizationStats};
use crate::error::{Error, Result};
use crate::estimate::{LambdaEstimator, UncertaintySet};
use crate::features::{class_scores, default_sigma, FeatureMap, FeatureMapSpec};
use crate::objective::{
    argmax_first, build_fixed_marginal_problem, build_learning_problem, build_lower_bound_problem,
    build_upper_bound_problem, phi, phi_from_scores, LearningObjective, SUBSET_CAP,
};
use crate::solver::{self, Method, SolverConfig, SolverRun, TracePoint};

/// Model file layout version.
pub const FORMAT_VERSION: u32 = 1;

/// Mass below which the randomized rule falls back to the uniform distribution.
pub const UNIFORM_FALLBACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Standard,
    /// Instance marginal fixed to the empirical one.
    FixedMarginal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureChoice {
    Rff,
    Identity,
}

/// Feature mapping requested for training; resolved against the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub kind: FeatureChoice,
    pub num_frequencies: usize,
    /// Kernel scale; `√(d/2)` when absent.
    pub sigma: Option<f64>,
    pub seed: u64,
    pub constant_feature: bool,
    /// Standardize instances with training statistics.
    pub normalize: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            kind: FeatureChoice::Rff,
            num_frequencies: 500,
            sigma: None,
            seed: 0,
            constant_feature: false,
            normalize: true,
        }
    }
}

impl FeatureConfig {
    pub fn rff(num_frequencies: usize, sigma: Option<f64>, seed: u64) -> Self {
        Self {
            num_frequencies,
            sigma,
            seed,
            ..Self::default()
        }
    }

    pub fn identity() -> Self {
        Self {
            kind: FeatureChoice::Identity,
            ..Self::default()
        }
    }

    /// Feature map for normalized training instances.
    pub fn build(&self, instances: ArrayView2<'_, f64>, num_classes: usize) -> Result<FeatureMap> {
        let spec = match self.kind {
            FeatureChoice::Rff => {
                let sigma = self.sigma.unwrap_or_else(|| default_sigma(instances.ncols()));
                FeatureMapSpec::random_fourier(instances.ncols(), num_classes, self.num_frequencies, Some(sigma), self.seed)
            }
            FeatureChoice::Identity => FeatureMapSpec::identity(num_classes, instances),
        };
        FeatureMap::new(spec.with_constant_feature(self.constant_feature))
    }
}

/// Instance set over which the supremum in `φ` is taken.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Anchor {
    #[default]
    Train,
    /// External pool in the original (unnormalized) coordinates.
    External { label: String, instances: Array2<f64> },
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub estimator: LambdaEstimator,
    pub solver: SolverConfig,
    pub variant: Variant,
    pub anchor: Anchor,
    /// Also solve for the lower bound `R̲(U)`.
    pub lower_bound: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            estimator: LambdaEstimator::default(),
            solver: SolverConfig::default(),
            variant: Variant::Standard,
            anchor: Anchor::Train,
            lower_bound: true,
        }
    }
}

/// Which solver produced a reported number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub method: Method,
    pub iterations: usize,
    /// `true` for LP-certified values, `false` for subgradient approximations.
    pub exact: bool,
    pub sparsity_gamma: f64,
    /// Rows of the materialized problem, zero in top-k mode.
    pub rows: usize,
}

impl SolveSummary {
    fn from_run(run: &SolverRun, rows: usize) -> Self {
        Self {
            method: run.method,
            iterations: run.iterations,
            exact: run.exact,
            sparsity_gamma: run.sparsity_gamma,
            rows,
        }
    }

    pub fn label(&self) -> &'static str {
        if self.exact {
            "exact"
        } else {
            "approximate"
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MrcModel {
    pub format_version: u32,
    pub crate_version: String,
    pub variant: Variant,
    /// Serialized as its spec; frequencies are regenerated on load.
    pub feature_map: FeatureMap,
    pub normalization: NormalizationStats,
    pub label_names: Vec<String>,
    pub uncertainty: UncertaintySet,
    #[serde(with = "array_serde")]
    pub mu_star: Array1<f64>,
    pub phi_star: f64,
    /// `R̄(U)`
    pub minimax_risk: f64,
    /// `R̲(U)`
    pub lower_bound: Option<f64>,
    #[serde(with = "array_serde::option", default)]
    pub mu_lower: Option<Array1<f64>>,
    /// Description of the anchor set (`train` or the external source).
    pub anchor_source: String,
    /// Anchor instances in normalized coordinates.
    pub anchor: Vec<Vec<f64>>,
    pub solver: SolveSummary,
    pub lower_solver: Option<SolveSummary>,
    /// Learning trace when requested in the solver config; not persisted.
    #[serde(skip)]
    pub trace: Vec<TracePoint>,
}

/// Test-set performance of the randomized and deterministic rules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n: usize,
    pub randomized_risk: f64,
    pub deterministic_error: f64,
}

/// `R̲(U, h) ≤ R̄(U, h)` for a fixed rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleBounds {
    pub lower: f64,
    pub upper: f64,
    #[serde(with = "array_serde")]
    pub mu_lower: Array1<f64>,
    #[serde(with = "array_serde")]
    pub mu_upper: Array1<f64>,
    pub lower_solver: SolveSummary,
    pub upper_solver: SolveSummary,
}

/// Interval widened for a larger confidence vector; reported values are
/// clamped to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HighConfidenceBounds {
    pub lo: f64,
    pub hi: f64,
    pub lo_raw: f64,
    pub hi_raw: f64,
}

/// Corrections relating the bounds to the true feature expectation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `(|τ∞ − τ| − λ)ᵀ|μ*|`
    pub upper_correction: f64,
    /// `(|τ∞ − τ| − λ)ᵀ|μ̲|`, absent without a lower-bound solve.
    pub lower_correction: Option<f64>,
    /// `|τ∞ − τ| ⪯ λ`
    pub covered: bool,
    /// `max(|τ∞ − τ| − λ)`
    pub max_excess: f64,
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

fn solve_rows(problem: &crate::objective::PiecewiseLinearProblem, config: &SolverConfig) -> Result<SolverRun> {
    solver::solve(problem, config)
}

/// Method usable on objectives without materialized rows.
fn generic_method(config: &SolverConfig) -> SolverConfig {
    let method = match config.method {
        Method::Bsm | Method::Ebsm => Method::Bsm,
        _ => Method::Asm,
    };
    if method != config.method {
        log::info!("solver {} needs materialized rows here; using {}", config.method, method);
    }
    SolverConfig {
        method,
        ..config.clone()
    }
}

/// Trains on a labeled dataset.
pub fn train(data: &Dataset, features: &FeatureConfig, config: &TrainConfig) -> Result<MrcModel> {
    let normalization = if features.normalize {
        NormalizationStats::fit(data.instances())?
    } else {
        NormalizationStats::identity(data.d())
    };
    let x = normalization.apply_matrix(data.instances())?;
    let map = features.build(x.view(), data.num_classes())?;
    let u = UncertaintySet::estimate(&map, x.view(), data.labels(), &config.estimator)?;
    let (anchor, source) = match &config.anchor {
        Anchor::Train => (x, "train".to_string()),
        Anchor::External { label, instances } => (normalization.apply_matrix(instances.view())?, label.clone()),
    };
    let u = if matches!(config.anchor, Anchor::External { .. }) {
        let repaired = u.repaired_for(anchor.view(), &map)?;
        if repaired.provenance.repaired {
            log::warn!("uncertainty set was empty on the anchor instances; widened to the nearest nonempty set");
        }
        repaired
    } else {
        u
    };
    fit_from_uncertainty(u, map, anchor.view(), normalization, data.label_names().to_vec(), source, config)
}

/// Learns from a given uncertainty set; `anchor` is in normalized coordinates.
pub fn fit_from_uncertainty(
    u: UncertaintySet,
    map: FeatureMap,
    anchor: ArrayView2<'_, f64>,
    normalization: NormalizationStats,
    label_names: Vec<String>,
    anchor_source: String,
    config: &TrainConfig,
) -> Result<MrcModel> {
    if label_names.len() != map.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: map.num_classes(),
            found: label_names.len(),
        });
    }
    let (run, rows) = match config.variant {
        Variant::Standard if map.num_classes() <= SUBSET_CAP => {
            let problem = build_learning_problem(&u, anchor, &map)?;
            (solve_rows(&problem, &config.solver)?, problem.num_rows())
        }
        Variant::Standard => {
            let objective = LearningObjective::new(&u, anchor, &map)?;
            (solver::minimize(&objective, &generic_method(&config.solver))?, 0)
        }
        Variant::FixedMarginal => {
            let objective = build_fixed_marginal_problem(&u, anchor, &map)?;
            (solver::minimize(&objective, &generic_method(&config.solver))?, 0)
        }
    };
    let phi_star = phi(run.best_mu.view(), anchor, &map)?;
    let mut model = MrcModel {
        format_version: FORMAT_VERSION,
        crate_version: crate::VERSION.to_string(),
        variant: config.variant,
        feature_map: map,
        normalization,
        label_names,
        uncertainty: u,
        mu_star: run.best_mu.clone(),
        phi_star,
        minimax_risk: run.best_value,
        lower_bound: None,
        mu_lower: None,
        anchor_source,
        anchor: anchor.outer_iter().map(|r| r.to_vec()).collect(),
        solver: SolveSummary::from_run(&run, rows),
        lower_solver: None,
        trace: run.trace.clone(),
    };
    if config.lower_bound {
        solve_lower_bound(&mut model, &config.solver)?;
    }
    Ok(model)
}

/// Solves for `R̲(U)` with the model's own rule over its anchor set.
pub fn solve_lower_bound(model: &mut MrcModel, config: &SolverConfig) -> Result<()> {
    let anchor = model.anchor_matrix();
    let h = model.rule_table(anchor.view())?;
    let problem = build_lower_bound_problem(&model.uncertainty, anchor.view(), &model.feature_map, h.view())?;
    let run = solve_rows(&problem, config)?;
    model.lower_bound = Some(problem.reported(run.best_value));
    model.lower_solver = Some(SolveSummary::from_run(&run, problem.num_rows()));
    model.mu_lower = Some(run.best_mu);
    Ok(())
}

/// `(Φᵀμ − φ)₊` normalized to a distribution; uniform when the mass is below
/// [`UNIFORM_FALLBACK`].
pub fn randomized_rule(scores: &[f64], phi: f64) -> (Vec<f64>, f64) {
    let raw: Vec<f64> = scores.iter().map(|s| (s - phi).max(0.0)).collect();
    let mass: f64 = raw.iter().sum();
    if mass > UNIFORM_FALLBACK {
        (raw.iter().map(|r| r / mass).collect(), mass)
    } else {
        (vec![1.0 / scores.len() as f64; scores.len()], mass)
    }
}

/// `(Φᵀμ − φ(μ, x))₊`, renormalized if round-off moved its sum away from 1.
pub fn fixed_marginal_rule(scores: &[f64]) -> Vec<f64> {
    let phi_x = phi_from_scores(scores);
    let mut h: Vec<f64> = scores.iter().map(|s| (s - phi_x).max(0.0)).collect();
    let total: f64 = h.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        log::warn!("fixed-marginal rule sums to {total}; renormalizing");
        h.iter_mut().for_each(|v| *v /= total);
    }
    h
}

impl MrcModel {
    pub fn num_classes(&self) -> usize {
        self.feature_map.num_classes()
    }

    pub fn input_dim(&self) -> usize {
        self.feature_map.input_dim()
    }

    pub fn anchor_matrix(&self) -> Array2<f64> {
        let d = self.input_dim();
        let flat: Vec<f64> = self.anchor.iter().flatten().copied().collect();
        Array2::from_shape_vec((self.anchor.len(), d), flat).expect("anchor rows have the input dimension")
    }

    /// `Φ(x, y)ᵀμ*` for a normalized instance.
    pub fn scores_normalized(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        let psi = self.feature_map.scalar_features(x)?;
        Ok(class_scores(psi.view(), self.mu_star.view(), self.num_classes()))
    }

    fn normalize(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.normalization.apply_row(x)
    }

    /// Rule probabilities for a normalized instance.
    pub fn proba_normalized(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        let scores = self.scores_normalized(x)?;
        Ok(match self.variant {
            Variant::Standard => randomized_rule(&scores, self.phi_star).0,
            Variant::FixedMarginal => fixed_marginal_rule(&scores),
        })
    }

    /// `h(·|x)` for an instance in original coordinates.
    pub fn predict_proba(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        self.proba_normalized(self.normalize(x)?.view())
    }

    /// `c_x = Σ_y (Φ(x, y)ᵀμ* − φ(μ*))₊` for an instance in original coordinates.
    pub fn positive_mass(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        let scores = self.scores_normalized(self.normalize(x)?.view())?;
        Ok(randomized_rule(&scores, self.phi_star).1)
    }

    /// Deterministic rule (1-based label), ties to the smallest label.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        let scores = self.scores_normalized(self.normalize(x)?.view())?;
        Ok(argmax_first(&scores) + 1)
    }

    /// Fixed-marginal rule regardless of the training variant.
    pub fn fixed_marginal_proba(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        if self.variant != Variant::FixedMarginal {
            return Err(Error::InvalidInput("model was not trained with the fixed-marginal variant".into()));
        }
        let scores = self.scores_normalized(self.normalize(x)?.view())?;
        Ok(fixed_marginal_rule(&scores))
    }

    /// `h(y|x)` for every row of normalized `instances`.
    pub fn rule_table(&self, instances: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut h = Array2::zeros((instances.nrows(), self.num_classes()));
        for (mut row, x) in h.outer_iter_mut().zip(instances.outer_iter()) {
            row.assign(&Array1::from(self.proba_normalized(x)?));
        }
        Ok(h)
    }

    /// One-hot table of the deterministic rule on normalized `instances`.
    pub fn deterministic_table(&self, instances: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut h = Array2::zeros((instances.nrows(), self.num_classes()));
        for (i, x) in instances.outer_iter().enumerate() {
            h[[i, argmax_first(&self.scores_normalized(x)?)]] = 1.0;
        }
        Ok(h)
    }

    /// Maps the labels of `data` to this model's label indices by name.
    pub fn encode_labels(&self, data: &Dataset) -> Result<Vec<usize>> {
        let lookup: Vec<usize> = data
            .label_names()
            .iter()
            .map(|name| {
                self.label_names
                    .iter()
                    .position(|n| n == name)
                    .map(|i| i + 1)
                    .ok_or_else(|| Error::InvalidInput(format!("label {name:?} was not seen in training")))
            })
            .collect::<Result<_>>()?;
        Ok(data.labels().iter().map(|&y| lookup[y - 1]).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: MrcModel = serde_json::from_str(&text)?;
        if model.format_version != FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        Ok(model)
    }
}

/// Mean randomized risk `1 − h(y|x)` and deterministic error on `test`.
pub fn evaluate(model: &MrcModel, test: &Dataset) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::InvalidInput("test set is empty".into()));
    }
    let labels = model.encode_labels(test)?;
    let x = model.normalization.apply_matrix(test.instances())?;
    let mut risk = 0.0;
    let mut errors = 0usize;
    for (xi, &y) in x.outer_iter().zip(&labels) {
        let scores = model.scores_normalized(xi)?;
        let h = match model.variant {
            Variant::Standard => randomized_rule(&scores, model.phi_star).0,
            Variant::FixedMarginal => fixed_marginal_rule(&scores),
        };
        risk += 1.0 - h[y - 1];
        if argmax_first(&scores) + 1 != y {
            errors += 1;
        }
    }
    let n = labels.len();
    Ok(Evaluation {
        n,
        randomized_risk: risk / n as f64,
        deterministic_error: errors as f64 / n as f64,
    })
}

/// Solves the lower- and upper-bound problems for the rule tabulated in `h`
/// (one row per anchor instance).
pub fn bounds_for_rule(
    u: &UncertaintySet,
    anchor: ArrayView2<'_, f64>,
    map: &FeatureMap,
    h: ArrayView2<'_, f64>,
    config: &SolverConfig,
) -> Result<RuleBounds> {
    let lower_problem = build_lower_bound_problem(u, anchor, map, h)?;
    let upper_problem = build_upper_bound_problem(u, anchor, map, h)?;
    let lower = solver::solve(&lower_problem, config)?;
    let upper = solver::solve(&upper_problem, config)?;
    Ok(RuleBounds {
        lower: lower_problem.reported(lower.best_value),
        upper: upper_problem.reported(upper.best_value),
        lower_solver: SolveSummary::from_run(&lower, lower_problem.num_rows()),
        upper_solver: SolveSummary::from_run(&upper, upper_problem.num_rows()),
        mu_lower: lower.best_mu,
        mu_upper: upper.best_mu,
    })
}

/// Bounds for the deterministic rule of `model` over its anchor set.
pub fn deterministic_bounds(model: &MrcModel, config: &SolverConfig) -> Result<RuleBounds> {
    let anchor = model.anchor_matrix();
    let h = model.deterministic_table(anchor.view())?;
    bounds_for_rule(&model.uncertainty, anchor.view(), &model.feature_map, h.view(), config)
}

/// `R̲(U) − (λδ − λ)ᵀ|μ̲|` and `R̄(U) + (λδ − λ)ᵀ|μ*|`.
pub fn high_confidence_bounds(model: &MrcModel, lambda_delta: ArrayView1<'_, f64>) -> Result<HighConfidenceBounds> {
    let lambda = &model.uncertainty.lambda;
    if lambda_delta.len() != lambda.len() {
        return Err(Error::DimensionMismatch {
            expected: lambda.len(),
            found: lambda_delta.len(),
        });
    }
    if let Some(i) = (0..lambda.len()).find(|&i| lambda_delta[i] < lambda[i]) {
        return Err(Error::WideningBelowLambda(i));
    }
    let (lower, mu_lower) = match (model.lower_bound, &model.mu_lower) {
        (Some(l), Some(mu)) => (l, mu),
        _ => return Err(Error::InvalidInput("model has no lower-bound solution".into())),
    };
    let widen = |mu: &Array1<f64>| -> f64 {
        (0..lambda.len())
            .map(|i| (lambda_delta[i] - lambda[i]) * mu[i].abs())
            .sum()
    };
    let lo_raw = lower - widen(mu_lower);
    let hi_raw = model.minimax_risk + widen(&model.mu_star);
    Ok(HighConfidenceBounds {
        lo: clamp01(lo_raw),
        hi: clamp01(hi_raw),
        lo_raw,
        hi_raw,
    })
}

/// Correction terms for an exactly known feature expectation `tau_inf`.
pub fn diagnostics(model: &MrcModel, tau_inf: ArrayView1<'_, f64>) -> Result<Diagnostics> {
    let u = &model.uncertainty;
    if tau_inf.len() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: tau_inf.len(),
        });
    }
    let excess: Array1<f64> = Array1::from_iter((0..u.dim()).map(|i| (tau_inf[i] - u.tau[i]).abs() - u.lambda[i]));
    let weigh = |mu: &Array1<f64>| excess.iter().zip(mu).map(|(e, m)| e * m.abs()).sum::<f64>();
    Ok(Diagnostics {
        upper_correction: weigh(&model.mu_star),
        lower_correction: model.mu_lower.as_ref().map(weigh),
        covered: excess.iter().all(|&e| e <= 0.0),
        max_excess: excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// `Σ p(x, y)(1 − h(y|x))` over a finite support of (instance in original
/// coordinates, 1-based label, probability) triples.
pub fn exact_risk_finite(model: &MrcModel, support: &[(Array1<f64>, usize, f64)]) -> Result<f64> {
    let total: f64 = support.iter().map(|s| s.2).sum();
    if support.iter().any(|s| !(s.2 >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "support probabilities must be nonnegative and sum to 1 (sum {total})"
        )));
    }
    let mut risk = 0.0;
    for (x, y, p) in support {
        if *y == 0 || *y > model.num_classes() {
            return Err(Error::LabelOutOfRange {
                label: *y,
                num_classes: model.num_classes(),
            });
        }
        risk += p * (1.0 - model.predict_proba(x.view())?[y - 1]);
    }
    Ok(risk)
}

/// `6|Y| √((4 + |Y|(m+1) log s + log(|Y|/δ)) / s)`, the optimization-error
/// guarantee for an anchor set of `s` instances. Vacuous (above 1) for small `s`.
pub fn epsilon_s(s: usize, m: usize, num_classes: usize, delta: f64) -> Result<f64> {
    if s == 0 {
        return Err(Error::InvalidInput("anchor set must be nonempty".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta must lie in (0, 1), got {delta}")));
    }
    let k = num_classes as f64;
    let s_f = s as f64;
    Ok(6.0 * k * ((4.0 + k * (m as f64 + 1.0) * s_f.ln() + (k / delta).ln()) / s_f).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::estimate::Provenance;
    use ndarray::array;

    fn identity_map(d: usize, k: usize) -> FeatureMap {
        FeatureMap::new(FeatureMapSpec::identity_with_bound(d, k, 1.0)).unwrap()
    }

    fn lp_config() -> TrainConfig {
        TrainConfig {
            solver: SolverConfig::new(Method::Lp),
            ..TrainConfig::default()
        }
    }

    fn model_with(mu: Array1<f64>, phi_star: f64, k: usize) -> MrcModel {
        let map = identity_map(1, k);
        let m = map.dim();
        let u = UncertaintySet::with_lambda(Array1::zeros(m), Array1::zeros(m), &map, 1).unwrap();
        MrcModel {
            format_version: FORMAT_VERSION,
            crate_version: crate::VERSION.into(),
            variant: Variant::Standard,
            feature_map: map,
            normalization: NormalizationStats::identity(1),
            label_names: (1..=k).map(|i| i.to_string()).collect(),
            uncertainty: u,
            mu_star: mu,
            phi_star,
            minimax_risk: 0.5,
            lower_bound: Some(0.1),
            mu_lower: Some(Array1::zeros(m)),
            anchor_source: "train".into(),
            anchor: vec![vec![1.0]],
            solver: SolveSummary {
                method: Method::Lp,
                iterations: 0,
                exact: true,
                sparsity_gamma: 0.0,
                rows: 0,
            },
            lower_solver: None,
            trace: Vec::new(),
        }
    }

    #[test]
    fn randomized_rule_by_hand() {
        assert_eq!(randomized_rule(&[0.9, 0.1], 0.1).0, vec![1.0, 0.0]);
        assert_eq!(randomized_rule(&[0.0, 0.0, 0.0], 0.0).0, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn fixed_marginal_rule_by_hand() {
        let h = fixed_marginal_rule(&[0.6, 0.2]);
        assert!((h[0] - 0.7).abs() < 1e-15 && (h[1] - 0.3).abs() < 1e-15);
        assert_eq!(fixed_marginal_rule(&[0.0, 0.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn zero_parameters_give_uniform_rule_and_first_label() {
        let model = model_with(Array1::zeros(3), -1.0 / 3.0, 3);
        assert_eq!(model.predict(array![0.4].view()).unwrap(), 1);
        let h = model.predict_proba(array![0.4].view()).unwrap();
        assert!(h.iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn predict_scores_by_hand() {
        // x = 1 gives scores (0.2, 0.7)
        let model = model_with(array![0.2, 0.7], 0.0, 2);
        assert_eq!(model.predict(array![1.0].view()).unwrap(), 2);
    }

    #[test]
    fn single_point_zero_lambda_has_zero_risk() {
        let data = Dataset::from_encoded(array![[0.5, -1.0]], vec![2], 3).unwrap();
        let features = FeatureConfig {
            normalize: false,
            ..FeatureConfig::identity()
        };
        let config = TrainConfig {
            estimator: LambdaEstimator::Practical { lambda0: 0.0 },
            ..lp_config()
        };
        // a single sample has no variance; use a given zero vector instead
        let x = data.instances().to_owned();
        let map = features.build(x.view(), 3).unwrap();
        let tau = map.feature_map(x.row(0), 2).unwrap();
        let m = map.dim();
        let u = UncertaintySet::with_lambda(tau, Array1::zeros(m), &map, 1).unwrap();
        let model = fit_from_uncertainty(u, map, x.view(), NormalizationStats::identity(2), vec!["a".into(), "b".into(), "c".into()], "train".into(), &config).unwrap();
        assert!(model.minimax_risk.abs() < 1e-9, "{}", model.minimax_risk);
        assert!(model.lower_bound.unwrap().abs() < 1e-9);
    }

    #[test]
    fn huge_lambda_forces_zero_parameters() {
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 0.5]];
        let map = identity_map(2, 2);
        let u = UncertaintySet::new(
            Array1::from_elem(4, 0.2),
            Array1::from_elem(4, 1e3),
            Provenance {
                estimator: LambdaEstimator::Given,
                feature_bound: 1.0,
                family_size: 2,
                num_classes: 2,
                n: 4,
                repaired: false,
            },
        )
        .unwrap();
        let model = fit_from_uncertainty(u, map, x.view(), NormalizationStats::identity(2), vec!["a".into(), "b".into()], "train".into(), &lp_config()).unwrap();
        assert!((model.minimax_risk - 0.5).abs() < 1e-9);
        assert!(model.mu_star.iter().all(|v| v.abs() < 1e-9));
        assert!((model.lower_bound.unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn high_confidence_bounds_shift() {
        let model = model_with(array![0.5, -1.5], 0.0, 2);
        let same = high_confidence_bounds(&model, model.uncertainty.lambda.view()).unwrap();
        assert_eq!((same.lo_raw, same.hi_raw), (0.1, 0.5));
        let wider = high_confidence_bounds(&model, array![0.1, 0.1].view()).unwrap();
        assert!((wider.hi_raw - 0.7).abs() < 1e-15);
        assert!(high_confidence_bounds(&model, array![-0.1, 0.0].view()).is_err());
    }

    #[test]
    fn diagnostics_corrections() {
        let mut model = model_with(array![0.5, -1.5], 0.0, 2);
        model.uncertainty.lambda = array![0.1, 0.2];
        model.mu_lower = Some(array![1.0, 0.0]);
        let d = diagnostics(&model, model.uncertainty.tau.view()).unwrap();
        assert!((d.upper_correction + 0.35).abs() < 1e-15);
        assert!((d.lower_correction.unwrap() + 0.1).abs() < 1e-15);
        assert!(d.covered);
        let d = diagnostics(&model, array![0.1, -0.2].view()).unwrap();
        assert!(d.upper_correction.abs() < 1e-15 && d.lower_correction.unwrap().abs() < 1e-15);
        assert!(diagnostics(&model, array![0.0].view()).is_err());
    }

    #[test]
    fn exact_risk_of_point_mass_and_uniform() {
        let model = model_with(array![1.0, 0.0], 0.0, 2);
        // x = 1: scores (1, 0), h = (1, 0)
        assert_eq!(exact_risk_finite(&model, &[(array![1.0], 1, 1.0)]).unwrap(), 0.0);
        let uniform = model_with(Array1::zeros(2), -0.5, 2);
        let support = [(array![1.0], 1, 0.3), (array![-2.0], 2, 0.7)];
        assert!((exact_risk_finite(&uniform, &support).unwrap() - 0.5).abs() < 1e-15);
        assert!(exact_risk_finite(&uniform, &[(array![1.0], 1, 0.5)]).is_err());
    }

    #[test]
    fn epsilon_s_values() {
        let one = epsilon_s(1, 4, 2, 0.05).unwrap();
        assert!((one - 12.0 * (4.0 + (2.0f64 / 0.05).ln()).sqrt()).abs() < 1e-12);
        assert!(epsilon_s(100_000_000, 4, 2, 0.05).unwrap() < epsilon_s(1000, 4, 2, 0.05).unwrap());
        assert!(epsilon_s(0, 4, 2, 0.05).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let model = model_with(array![0.3, -0.2], 0.01, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        model.save(&path).unwrap();
        let back = MrcModel::load(&path).unwrap();
        assert_eq!(back, model);
    }
}

//! Uncertainty sets: mean vectors from sample averages and confidence vectors
//! from concentration inequalities.
//!
//! All logarithms are natural.

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::array_serde;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::solver::lp::{LinearProgram, Relation};

/// How the confidence vector is obtained from training samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LambdaEstimator {
    /// `λ = C √(2 log(2|F||Y|/δ) / n)`
    Hoeffding { delta: f64 },
    /// Empirical Bernstein widths using per-component sample variances.
    Bernstein { delta: f64 },
    /// Widths from a Rademacher complexity bound `R_n(F) ≤ R/√n`.
    Rademacher { delta: f64, r: f64 },
    /// `λ = λ₀ √(υ/n)`
    Practical { lambda0: f64 },
    /// Caller-supplied vector.
    Given,
}

impl Default for LambdaEstimator {
    fn default() -> Self {
        LambdaEstimator::Practical { lambda0: 0.3 }
    }
}

/// Where the confidence vector came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub estimator: LambdaEstimator,
    pub feature_bound: f64,
    pub family_size: usize,
    pub num_classes: usize,
    pub n: usize,
    /// Set when the mean and confidence vectors were widened to make the
    /// uncertainty set nonempty on the anchor instances.
    pub repaired: bool,
}

/// Distributions whose feature expectation lies within `lambda` of `tau`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySet {
    #[serde(with = "array_serde")]
    pub tau: Array1<f64>,
    #[serde(with = "array_serde")]
    pub lambda: Array1<f64>,
    pub provenance: Provenance,
}

impl UncertaintySet {
    pub fn new(tau: Array1<f64>, lambda: Array1<f64>, provenance: Provenance) -> Result<Self> {
        if tau.len() != lambda.len() {
            return Err(Error::DimensionMismatch {
                expected: tau.len(),
                found: lambda.len(),
            });
        }
        if tau.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("mean vector has non-finite entries".into()));
        }
        if lambda.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput("confidence vector must be finite and nonnegative".into()));
        }
        Ok(Self { tau, lambda, provenance })
    }

    /// Uncertainty set with a caller-supplied confidence vector.
    pub fn with_lambda(tau: Array1<f64>, lambda: Array1<f64>, map: &FeatureMap, n: usize) -> Result<Self> {
        let provenance = Provenance {
            estimator: LambdaEstimator::Given,
            feature_bound: map.feature_bound(),
            family_size: map.block_len(),
            num_classes: map.num_classes(),
            n,
            repaired: false,
        };
        Self::new(tau, lambda, provenance)
    }

    pub fn dim(&self) -> usize {
        self.tau.len()
    }

    /// Estimates `τ` as the sample average of `Φ(x_i, y_i)` and `λ` with the
    /// requested estimator. `instances` must already be normalized.
    pub fn estimate(
        map: &FeatureMap,
        instances: ArrayView2<'_, f64>,
        labels: &[usize],
        estimator: &LambdaEstimator,
    ) -> Result<Self> {
        let rows = map.feature_rows(instances, labels)?;
        let n = labels.len();
        let c = map.feature_bound();
        let family = map.block_len();
        let k = map.num_classes();
        let (tau, lambda) = match estimator {
            LambdaEstimator::Hoeffding { delta } => {
                let tau = sample_mean(rows.view())?;
                let width = lambda_hoeffding(c, family, k, *delta, n)?;
                let m = tau.len();
                (tau, Array1::from_elem(m, width))
            }
            LambdaEstimator::Bernstein { delta } => {
                let (tau, var) = sample_moments(rows.view())?;
                (tau, lambda_bernstein(c, family, k, *delta, n, var.view())?)
            }
            LambdaEstimator::Rademacher { delta, r } => {
                let tau = sample_mean(rows.view())?;
                let mut counts = vec![0usize; k];
                for &y in labels {
                    counts[y - 1] += 1;
                }
                let block_of: Vec<usize> = (0..map.dim()).map(|i| i / family).collect();
                (tau, lambda_rademacher(c, *r, *delta, n, &counts, &block_of)?)
            }
            LambdaEstimator::Practical { lambda0 } => {
                let (tau, var) = sample_moments(rows.view())?;
                (tau, lambda_practical(*lambda0, var.view(), n)?)
            }
            LambdaEstimator::Given => {
                return Err(Error::InvalidInput(
                    "a given confidence vector cannot be estimated from samples".into(),
                ))
            }
        };
        Self::new(
            tau,
            lambda,
            Provenance {
                estimator: estimator.clone(),
                feature_bound: c,
                family_size: family,
                num_classes: k,
                n,
                repaired: false,
            },
        )
    }
}

/// Row average of `rows` (one feature vector per sample).
pub fn sample_mean(rows: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    rows.mean_axis(Axis(0))
        .ok_or_else(|| Error::InvalidInput("mean of an empty sample".into()))
}

/// Row average and per-component unbiased sample variance.
pub fn sample_moments(rows: ArrayView2<'_, f64>) -> Result<(Array1<f64>, Array1<f64>)> {
    let n = rows.nrows();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "sample variance needs at least 2 samples, got {n}"
        )));
    }
    let mean = sample_mean(rows)?;
    let mut var = Array1::zeros(mean.len());
    for row in rows.outer_iter() {
        for ((v, x), m) in var.iter_mut().zip(row.iter()).zip(mean.iter()) {
            *v += (x - m) * (x - m);
        }
    }
    var /= (n - 1) as f64;
    Ok((mean, var))
}

/// `τ = (1/n) Σ Φ(x_i, y_i)`.
pub fn mean_vector(map: &FeatureMap, instances: ArrayView2<'_, f64>, labels: &[usize]) -> Result<Array1<f64>> {
    sample_mean(map.feature_rows(instances, labels)?.view())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

fn check_common(c: f64, n: usize) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidInput(format!("feature bound must be positive, got {c}")));
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be positive".into()));
    }
    Ok(())
}

/// Uniform width `C √(2 log(2|F||Y|/δ) / n)` for a finite family of bounded features.
pub fn lambda_hoeffding(c: f64, family_size: usize, num_classes: usize, delta: f64, n: usize) -> Result<f64> {
    check_common(c, n)?;
    check_delta(delta)?;
    if family_size == 0 || num_classes == 0 {
        return Err(Error::InvalidInput("family size and class count must be positive".into()));
    }
    let log_term = (2.0 * family_size as f64 * num_classes as f64 / delta).ln();
    Ok(c * (2.0 * log_term / n as f64).sqrt())
}

/// Empirical Bernstein widths
/// `2C √(2 υ_i log(4|F||Y|/δ) / n) + 14 C log(4|F||Y|/δ) / (3(n−1))`.
pub fn lambda_bernstein(
    c: f64,
    family_size: usize,
    num_classes: usize,
    delta: f64,
    n: usize,
    variance: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    check_common(c, n)?;
    check_delta(delta)?;
    if n < 2 {
        return Err(Error::InvalidInput(format!("Bernstein widths need n ≥ 2, got {n}")));
    }
    if variance.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidInput("variances must be nonnegative".into()));
    }
    let log_term = (4.0 * family_size as f64 * num_classes as f64 / delta).ln();
    let n_f = n as f64;
    let second = 14.0 * c * log_term / (3.0 * (n_f - 1.0));
    Ok(variance.mapv(|v| 2.0 * c * (2.0 * v * log_term / n_f).sqrt() + second))
}

/// Rademacher-complexity widths. `block_of[i]` is the 0-based class whose block
/// contains component `i`, and `class_counts[j]` the samples with that class.
pub fn lambda_rademacher(
    c: f64,
    r: f64,
    delta: f64,
    n: usize,
    class_counts: &[usize],
    block_of: &[usize],
) -> Result<Array1<f64>> {
    check_common(c, n)?;
    check_delta(delta)?;
    if !(r > 0.0) {
        return Err(Error::InvalidInput(format!("Rademacher constant must be positive, got {r}")));
    }
    if class_counts.iter().sum::<usize>() != n {
        return Err(Error::InvalidInput("class counts must sum to n".into()));
    }
    let num_classes = class_counts.len();
    let n_f = n as f64;
    let tail = ((4.0 * num_classes as f64 / delta).ln() / (2.0 * n_f)).sqrt();
    block_of
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let count = *class_counts.get(j).ok_or_else(|| {
                Error::InvalidInput(format!("component {i} maps to unknown class index {j}"))
            })?;
            let frac = (count as f64 / n_f).sqrt();
            Ok(2.0 * frac * r / n_f.sqrt() + c * (1.0 + 2.0 * frac) * tail)
        })
        .collect()
}

/// `λ = λ₀ √(υ/n)` component-wise.
pub fn lambda_practical(lambda0: f64, variance: ArrayView1<'_, f64>, n: usize) -> Result<Array1<f64>> {
    if !(lambda0 >= 0.0) {
        return Err(Error::InvalidInput(format!("lambda0 must be nonnegative, got {lambda0}")));
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!("practical widths need n ≥ 2, got {n}")));
    }
    if let Some(v) = variance.iter().find(|&&v| !(v >= 0.0)) {
        return Err(Error::InvalidInput(format!("negative variance entry {v}")));
    }
    Ok(variance.mapv(|v| lambda0 * (v / n as f64).sqrt()))
}

/// Widens `(tau, lambda)` as little as possible (in `1ᵀ(λ₁+λ₂)`) so that some
/// distribution on `anchor × Y` has its feature expectation inside the box.
///
/// Returns `(τ + (λ₂−λ₁)/2, (λ₁+λ₂)/2)`; the result is always ⪰ `lambda`.
pub fn ensure_feasible(
    tau: ArrayView1<'_, f64>,
    lambda: ArrayView1<'_, f64>,
    anchor: ArrayView2<'_, f64>,
    map: &FeatureMap,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let m = map.dim();
    if tau.len() != m || lambda.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: tau.len().min(lambda.len()),
        });
    }
    if anchor.nrows() == 0 {
        return Err(Error::InvalidInput("anchor instance set is empty".into()));
    }
    let psi = map.scalar_matrix(anchor)?;
    let s = anchor.nrows();
    let k = map.num_classes();
    let width = map.block_len();
    let np = s * k;
    // variables: p (s·|Y|, instance-major), e₁ (m), e₂ (m) with λ_j = λ + e_j
    let nv = np + 2 * m;
    let mut objective = vec![0.0; nv];
    for v in objective.iter_mut().skip(np) {
        *v = 1.0;
    }
    let mut lp = LinearProgram::new(objective);
    let mut simplex_row = vec![0.0; nv];
    for v in simplex_row.iter_mut().take(np) {
        *v = 1.0;
    }
    lp.add_constraint(simplex_row, Relation::Eq, 1.0)?;
    for i in 0..m {
        let class = i / width;
        let feature = i % width;
        let mut expectation = vec![0.0; nv];
        for x in 0..s {
            expectation[x * k + class] = psi[[x, feature]];
        }
        let mut lower = expectation.clone();
        lower[np + i] = 1.0;
        lp.add_constraint(lower, Relation::Ge, tau[i] - lambda[i])?;
        let mut upper = expectation;
        upper[np + m + i] = -1.0;
        lp.add_constraint(upper, Relation::Le, tau[i] + lambda[i])?;
    }
    let sol = lp.solve()?;
    let e1 = &sol.x[np..np + m];
    let e2 = &sol.x[np + m..];
    let new_tau = Array1::from_iter((0..m).map(|i| tau[i] + (e2[i] - e1[i]) / 2.0));
    let new_lambda = Array1::from_iter((0..m).map(|i| lambda[i] + (e1[i] + e2[i]) / 2.0));
    Ok((new_tau, new_lambda))
}

impl UncertaintySet {
    /// [`ensure_feasible`] applied to this set; marks the provenance when widened.
    pub fn repaired_for(&self, anchor: ArrayView2<'_, f64>, map: &FeatureMap) -> Result<Self> {
        let (tau, lambda) = ensure_feasible(self.tau.view(), self.lambda.view(), anchor, map)?;
        let widened = tau.iter().zip(&self.tau).any(|(a, b)| a != b)
            || lambda.iter().zip(&self.lambda).any(|(a, b)| a != b);
        let mut provenance = self.provenance.clone();
        provenance.repaired |= widened;
        Self::new(tau, lambda, provenance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMapSpec;
    use ndarray::array;

    #[test]
    fn moments_of_two_samples() {
        let (tau, var) = sample_moments(array![[0.0, 1.0], [2.0, 1.0]].view()).unwrap();
        assert_eq!(tau, array![1.0, 1.0]);
        assert_eq!(var, array![2.0, 0.0]);
    }

    #[test]
    fn variance_needs_two_samples() {
        assert!(sample_moments(array![[0.0, 1.0]].view()).is_err());
        assert!(sample_mean(ndarray::Array2::<f64>::zeros((0, 2)).view()).is_err());
    }

    #[test]
    fn mean_of_repeated_sample_is_that_sample() {
        let map = FeatureMap::new(FeatureMapSpec::identity_with_bound(2, 2, 1.0)).unwrap();
        let x = array![[0.5, -0.25], [0.5, -0.25], [0.5, -0.25]];
        let tau = mean_vector(&map, x.view(), &[2, 2, 2]).unwrap();
        assert_eq!(tau, map.feature_map(x.row(0), 2).unwrap());
    }

    #[test]
    fn hoeffding_plug_in() {
        let v = lambda_hoeffding(1.0, 1, 2, 0.5, 2).unwrap();
        assert!((v - 8f64.ln().sqrt()).abs() < 1e-15);
        assert!((v - 1.4420).abs() < 1e-4);
        let quarter = lambda_hoeffding(1.0, 3, 2, 0.1, 400).unwrap();
        let base = lambda_hoeffding(1.0, 3, 2, 0.1, 100).unwrap();
        assert!((2.0 * quarter - base).abs() < 1e-15);
        assert!(lambda_hoeffding(1.0, 1, 2, 1.0, 2).is_err());
        assert!(lambda_hoeffding(1.0, 1, 2, 4.0, 2).is_err());
    }

    #[test]
    fn bernstein_zero_variance_plug_in() {
        // log(4|F||Y|/δ) = 3 with |F||Y| = 2, so λ = 14·3/(3·14) = 1
        let delta = 8.0 / 3f64.exp();
        let lam = lambda_bernstein(1.0, 1, 2, delta, 15, array![0.0].view()).unwrap();
        assert!((lam[0] - 1.0).abs() < 1e-14);
        let doubled = lambda_bernstein(2.0, 1, 2, delta, 15, array![0.3].view()).unwrap();
        let single = lambda_bernstein(1.0, 1, 2, delta, 15, array![0.3].view()).unwrap();
        assert!((doubled[0] - 2.0 * single[0]).abs() < 1e-14);
        let big_n = lambda_bernstein(1.0, 1, 2, delta, 1_000_000_000, array![0.0].view()).unwrap();
        assert!(big_n[0] < 1e-7);
        assert!(lambda_bernstein(1.0, 1, 2, 0.1, 1, array![0.0].view()).is_err());
    }

    #[test]
    fn rademacher_plug_in() {
        // balanced binary, n = 100, R = C = 1
        let delta = 0.5;
        let lam = lambda_rademacher(1.0, 1.0, delta, 100, &[50, 50], &[0, 0, 1, 1]).unwrap();
        let tail = ((8.0f64 / delta).ln() / 200.0).sqrt();
        let expected = 2.0 * 0.5f64.sqrt() * 0.1 + (1.0 + 2.0 * 0.5f64.sqrt()) * tail;
        assert!((lam[0] - expected).abs() < 1e-15);
        assert_eq!(lam[0], lam[1]);
        assert_eq!(lam[1], lam[3]);
    }

    #[test]
    fn rademacher_empty_class_limit_and_unmapped_component() {
        let lam = lambda_rademacher(1.0, 1.0, 0.1, 10, &[10, 0], &[1]).unwrap();
        assert!((lam[0] - ((8.0f64 / 0.1).ln() / 20.0).sqrt()).abs() < 1e-15);
        assert!(lambda_rademacher(1.0, 1.0, 0.1, 10, &[10, 0], &[2]).is_err());
    }

    #[test]
    fn practical_widths() {
        let lam = lambda_practical(0.3, array![4.0, 0.0].view(), 100).unwrap();
        assert!((lam[0] - 0.06).abs() < 1e-15);
        assert_eq!(lam[1], 0.0);
        assert_eq!(lambda_practical(0.0, array![4.0].view(), 100).unwrap()[0], 0.0);
        assert!(lambda_practical(0.3, array![-1.0].view(), 100).is_err());
    }

    #[test]
    fn ensure_feasible_tiny_lp() {
        // m = 1: block of one class with identity feature; the second class block
        // is pinned at zero by giving it a single zero feature... use two classes
        // with the class-2 component targeted at 0 so only class 1 matters.
        let map = FeatureMap::new(FeatureMapSpec::identity_with_bound(1, 2, 1.0)).unwrap();
        let anchor = array![[0.0], [1.0]];
        // component 0 = class-1 expectation of x, component 1 = class-2 expectation
        let tau = array![5.0, 0.0];
        let lambda = array![0.0, 0.0];
        let (t, l) = ensure_feasible(tau.view(), lambda.view(), anchor.view(), &map).unwrap();
        assert!((t[0] - 3.0).abs() < 1e-9, "{t}");
        assert!((l[0] - 2.0).abs() < 1e-9, "{l}");
        assert!(t[1].abs() < 1e-9 && l[1].abs() < 1e-9);
    }

    #[test]
    fn ensure_feasible_keeps_achievable_sets() {
        let map = FeatureMap::new(FeatureMapSpec::identity_with_bound(2, 2, 2.0)).unwrap();
        let x = array![[0.5, 1.0], [-1.0, 0.25], [2.0, -0.5]];
        let labels = [1, 2, 1];
        let tau = mean_vector(&map, x.view(), &labels).unwrap();
        let lambda = Array1::from_elem(4, 0.01);
        let (t, l) = ensure_feasible(tau.view(), lambda.view(), x.view(), &map).unwrap();
        for i in 0..4 {
            assert!((t[i] - tau[i]).abs() < 1e-9);
            assert!((l[i] - lambda[i]).abs() < 1e-9);
        }
    }
}

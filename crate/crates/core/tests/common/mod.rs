//! Synthetic problems, distributions and reference evaluations shared by the
//! integration tests.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use mrc::classifier::{self, TrainConfig};
use mrc::dataset::{Dataset, NormalizationStats};
use mrc::estimate::{Provenance, UncertaintySet};
use mrc::features::{FeatureMap, FeatureMapSpec};
use mrc::{LambdaEstimator, MrcModel, PiecewiseLinearProblem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `F ~ U[-1,1]`, `τ = Fᵀq` for a random distribution `q` over rows,
/// `λ ~ U[0, 0.1]`, `b ~ U[-1, 0]`. The objective is bounded below because
/// `−τ` lies in the convex hull of `−Fᵀ`.
pub fn random_problem(m: usize, p: usize, seed: u64) -> PiecewiseLinearProblem {
    let mut r = rng(seed);
    let f = Array2::from_shape_fn((p, m), |_| r.gen_range(-1.0..1.0));
    let mut q = Array1::from_shape_fn(p, |_| r.gen::<f64>());
    q /= q.sum();
    let tau = f.t().dot(&q);
    let lambda = Array1::from_shape_fn(m, |_| r.gen_range(0.0..0.1));
    let b = Array1::from_shape_fn(p, |_| r.gen_range(-1.0..0.0));
    PiecewiseLinearProblem::new(-tau, lambda, f, b, 1.0).unwrap()
}

/// `max_C (Σ_{y∈C} s_y − 1)/|C|` by visiting every nonempty subset.
pub fn phi_enumerated(scores: &[f64]) -> f64 {
    let k = scores.len();
    let mut best = f64::NEG_INFINITY;
    for mask in 1u32..(1 << k) {
        let mut sum = 0.0;
        let mut size = 0.0;
        for (y, s) in scores.iter().enumerate() {
            if mask & (1 << y) != 0 {
                sum += s;
                size += 1.0;
            }
        }
        best = best.max((sum - 1.0) / size);
    }
    best
}

/// Distribution with finite support `{x_1..x_s} × Y`.
pub struct FiniteDistribution {
    /// Distinct instances, one per row.
    pub instances: Array2<f64>,
    pub num_classes: usize,
    /// `p[x][y]`, summing to one.
    pub prob: Array2<f64>,
}

impl FiniteDistribution {
    pub fn random(s: usize, d: usize, num_classes: usize, seed: u64) -> Self {
        let mut r = rng(seed);
        let instances = Array2::from_shape_fn((s, d), |_| r.gen_range(-1.0..1.0));
        // Labels depend on the instance so that the problem is not trivial.
        let w = Array2::from_shape_fn((d, num_classes), |_| r.gen_range(-2.0..2.0));
        let logits = instances.dot(&w);
        let mut prob = Array2::zeros((s, num_classes));
        for x in 0..s {
            let mx = logits.row(x).iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.row(x).iter().map(|l| (l - mx).exp()).collect();
            let z: f64 = e.iter().sum();
            let px = r.gen_range(0.2..1.0);
            for y in 0..num_classes {
                prob[[x, y]] = px * e[y] / z;
            }
        }
        let total = prob.sum();
        prob /= total;
        Self {
            instances,
            num_classes,
            prob,
        }
    }

    /// `E{Φ}` computed exactly.
    pub fn expectation(&self, map: &FeatureMap) -> Array1<f64> {
        let mut tau = Array1::zeros(map.dim());
        for x in 0..self.instances.nrows() {
            for y in 0..self.num_classes {
                let phi = map.feature_map(self.instances.row(x), y + 1).unwrap();
                tau.scaled_add(self.prob[[x, y]], &phi);
            }
        }
        tau
    }

    /// `(instance, 1-based label, probability)` triples.
    pub fn support(&self) -> Vec<(Array1<f64>, usize, f64)> {
        let mut out = Vec::new();
        for x in 0..self.instances.nrows() {
            for y in 0..self.num_classes {
                out.push((self.instances.row(x).to_owned(), y + 1, self.prob[[x, y]]));
            }
        }
        out
    }

    pub fn sample(&self, n: usize, r: &mut ChaCha8Rng) -> (Array2<f64>, Vec<usize>) {
        let flat: Vec<f64> = self.prob.iter().copied().collect();
        let mut cdf = Vec::with_capacity(flat.len());
        let mut acc = 0.0;
        for p in &flat {
            acc += p;
            cdf.push(acc);
        }
        let d = self.instances.ncols();
        let mut x = Array2::zeros((n, d));
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let u = r.gen::<f64>() * acc;
            let j = cdf.iter().position(|&c| u < c).unwrap_or(flat.len() - 1);
            x.row_mut(i).assign(&self.instances.row(j / self.num_classes));
            labels.push(j % self.num_classes + 1);
        }
        (x, labels)
    }
}

pub fn given_set(tau: Array1<f64>, lambda: Array1<f64>, map: &FeatureMap) -> UncertaintySet {
    UncertaintySet::new(
        tau,
        lambda,
        Provenance {
            estimator: LambdaEstimator::Given,
            feature_bound: map.feature_bound(),
            family_size: map.block_len(),
            num_classes: map.num_classes(),
            n: 0,
            repaired: false,
        },
    )
    .unwrap()
}

/// Small random-Fourier map used with finite distributions.
pub fn small_rff(d: usize, num_classes: usize, freqs: usize, seed: u64) -> FeatureMap {
    FeatureMap::new(FeatureMapSpec::random_fourier(d, num_classes, freqs, Some(1.0), seed)).unwrap()
}

/// Model learned from an explicit set, with the support of `dist` as anchor
/// and no normalization.
pub fn model_on_support(dist: &FiniteDistribution, u: UncertaintySet, map: FeatureMap, config: &TrainConfig) -> MrcModel {
    let names = (1..=dist.num_classes).map(|y| y.to_string()).collect();
    classifier::fit_from_uncertainty(
        u,
        map,
        dist.instances.view(),
        NormalizationStats::identity(dist.instances.ncols()),
        names,
        "support".into(),
        config,
    )
    .unwrap()
}

/// Unit-variance Gaussian classes around random centers.
pub fn gaussian_blobs(n: usize, d: usize, num_classes: usize, separation: f64, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let centers = Array2::from_shape_fn((num_classes, d), |_| r.gen_range(-separation..separation));
    let mut x = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % num_classes;
        for j in 0..d {
            let z: f64 = r.sample(StandardNormal);
            x[[i, j]] = centers[[y, j]] + z;
        }
        labels.push(y + 1);
    }
    Dataset::from_encoded(x, labels, num_classes).unwrap()
}

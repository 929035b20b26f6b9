//! Feature mappings `Φ(x, y) = e_y ⊗ Ψ(x)`.
//!
//! `Ψ` is either the (normalized) instance itself or a vector of random
//! Fourier features `(cos u_1ᵀx, sin u_1ᵀx, ..., cos u_Dᵀx, sin u_Dᵀx)` whose
//! frequencies are Gaussian with covariance `I/σ²`. Frequencies are never
//! stored; they are regenerated from the seed.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the frequency generator recorded in model files.
pub const FREQUENCY_GENERATOR: &str = "chacha8-box-muller";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    OneHotIdentity,
    RandomFourier {
        num_frequencies: usize,
        sigma: f64,
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapSpec {
    #[serde(flatten)]
    pub kind: FeatureKind,
    pub input_dim: usize,
    pub num_classes: usize,
    /// Prepends a constant 1 to `Ψ(x)`.
    pub constant_feature: bool,
    /// Bound `C` on every scalar feature, `|ψ(x)| ≤ C`.
    pub feature_bound: f64,
    pub generator: String,
}

/// Default kernel scale for `d`-dimensional standardized instances.
pub fn default_sigma(d: usize) -> f64 {
    (d as f64 / 2.0).sqrt()
}

impl FeatureMapSpec {
    pub fn random_fourier(input_dim: usize, num_classes: usize, num_frequencies: usize, sigma: Option<f64>, seed: u64) -> Self {
        Self {
            kind: FeatureKind::RandomFourier {
                num_frequencies,
                sigma: sigma.unwrap_or_else(|| default_sigma(input_dim)),
                seed,
            },
            input_dim,
            num_classes,
            constant_feature: false,
            feature_bound: 1.0,
            generator: FREQUENCY_GENERATOR.to_string(),
        }
    }

    /// Identity scalar features; `C` is the largest absolute entry of `training`.
    pub fn identity(num_classes: usize, training: ArrayView2<'_, f64>) -> Self {
        let bound = training.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        Self::identity_with_bound(training.ncols(), num_classes, bound)
    }

    pub fn identity_with_bound(input_dim: usize, num_classes: usize, feature_bound: f64) -> Self {
        Self {
            kind: FeatureKind::OneHotIdentity,
            input_dim,
            num_classes,
            constant_feature: false,
            feature_bound,
            generator: FREQUENCY_GENERATOR.to_string(),
        }
    }

    pub fn with_constant_feature(mut self, on: bool) -> Self {
        self.constant_feature = on;
        if on {
            self.feature_bound = self.feature_bound.max(1.0);
        }
        self
    }

    /// Number of scalar features per class block.
    pub fn block_len(&self) -> usize {
        let base = match self.kind {
            FeatureKind::OneHotIdentity => self.input_dim,
            FeatureKind::RandomFourier { num_frequencies, .. } => 2 * num_frequencies,
        };
        base + usize::from(self.constant_feature)
    }

    /// Length `m` of `Φ(x, y)`.
    pub fn dim(&self) -> usize {
        self.num_classes * self.block_len()
    }
}

/// Draws `rows × cols` independent standard normals with the Box–Muller transform.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = move || {
        // (0, 1]
        1.0 - (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    };
    let total = rows * cols;
    let mut values = Vec::with_capacity(total + 1);
    while values.len() < total {
        let r = (-2.0 * unit().ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * unit();
        values.push(r * angle.cos());
        values.push(r * angle.sin());
    }
    values.truncate(total);
    Array2::from_shape_vec((rows, cols), values).expect("shape")
}

/// A feature mapping ready for evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeatureMapSpec", into = "FeatureMapSpec")]
pub struct FeatureMap {
    spec: FeatureMapSpec,
    /// `D × d`, row `i` is the frequency `u_i`.
    frequencies: Option<Array2<f64>>,
}

impl TryFrom<FeatureMapSpec> for FeatureMap {
    type Error = Error;

    fn try_from(spec: FeatureMapSpec) -> Result<Self> {
        FeatureMap::new(spec)
    }
}

impl From<FeatureMap> for FeatureMapSpec {
    fn from(map: FeatureMap) -> Self {
        map.spec
    }
}

impl FeatureMap {
    pub fn new(spec: FeatureMapSpec) -> Result<Self> {
        if spec.num_classes < 2 {
            return Err(Error::InvalidInput(format!(
                "feature map needs at least 2 classes, got {}",
                spec.num_classes
            )));
        }
        if spec.input_dim == 0 {
            return Err(Error::InvalidInput("instances must have at least one component".into()));
        }
        let frequencies = match spec.kind {
            FeatureKind::OneHotIdentity => None,
            FeatureKind::RandomFourier {
                num_frequencies,
                sigma,
                seed,
            } => {
                if num_frequencies == 0 {
                    return Err(Error::InvalidInput("at least one random frequency is required".into()));
                }
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidInput(format!("kernel scale must be positive, got {sigma}")));
                }
                if spec.generator != FREQUENCY_GENERATOR {
                    return Err(Error::InvalidInput(format!(
                        "unknown frequency generator {:?}",
                        spec.generator
                    )));
                }
                Some(gaussian_matrix(num_frequencies, spec.input_dim, seed) / sigma)
            }
        };
        Ok(Self { spec, frequencies })
    }

    pub fn spec(&self) -> &FeatureMapSpec {
        &self.spec
    }

    pub fn frequencies(&self) -> Option<&Array2<f64>> {
        self.frequencies.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    pub fn block_len(&self) -> usize {
        self.spec.block_len()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn feature_bound(&self) -> f64 {
        self.spec.feature_bound
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim,
                found,
            });
        }
        Ok(())
    }

    fn write_scalar_features(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        let mut offset = 0;
        if self.spec.constant_feature {
            out[0] = 1.0;
            offset = 1;
        }
        match &self.frequencies {
            None => {
                for (o, v) in out[offset..].iter_mut().zip(x.iter()) {
                    *o = *v;
                }
            }
            Some(freq) => {
                for (k, u) in freq.outer_iter().enumerate() {
                    let t = u.dot(&x);
                    out[offset + 2 * k] = t.cos();
                    out[offset + 2 * k + 1] = t.sin();
                }
            }
        }
    }

    /// `Ψ(x)`, the scalar features of one instance.
    pub fn scalar_features(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check_dim(x.len())?;
        let mut out = Array1::zeros(self.block_len());
        self.write_scalar_features(x, out.as_slice_mut().expect("contiguous"));
        Ok(out)
    }

    /// `Ψ` for every row of `instances`, one row per instance.
    pub fn scalar_matrix(&self, instances: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_dim(instances.ncols())?;
        let width = self.block_len();
        let mut out = Array2::zeros((instances.nrows(), width));
        if let (Some(freq), false) = (&self.frequencies, self.spec.constant_feature) {
            // n × D projections in one product
            let proj = instances.dot(&freq.t());
            for (mut row, p) in out.rows_mut().into_iter().zip(proj.rows()) {
                for (k, t) in p.iter().enumerate() {
                    row[2 * k] = t.cos();
                    row[2 * k + 1] = t.sin();
                }
            }
            return Ok(out);
        }
        for (mut row, x) in out.rows_mut().into_iter().zip(instances.rows()) {
            self.write_scalar_features(x, row.as_slice_mut().expect("contiguous"));
        }
        Ok(out)
    }

    fn check_label(&self, y: usize) -> Result<()> {
        if y == 0 || y > self.spec.num_classes {
            return Err(Error::LabelOutOfRange {
                label: y,
                num_classes: self.spec.num_classes,
            });
        }
        Ok(())
    }

    /// `Φ(x, y)`: `Ψ(x)` placed in block `y` (1-based), zeros elsewhere.
    pub fn feature_map(&self, x: ArrayView1<'_, f64>, y: usize) -> Result<Array1<f64>> {
        self.check_label(y)?;
        let psi = self.scalar_features(x)?;
        Ok(embed(&psi, y, self.num_classes()))
    }

    /// `Φ(x_i, y_i)` for every sample, one row per sample.
    pub fn feature_rows(&self, instances: ArrayView2<'_, f64>, labels: &[usize]) -> Result<Array2<f64>> {
        if instances.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: instances.nrows(),
                found: labels.len(),
            });
        }
        for &y in labels {
            self.check_label(y)?;
        }
        let psi = self.scalar_matrix(instances)?;
        let width = self.block_len();
        let mut out = Array2::zeros((labels.len(), self.dim()));
        for (i, &y) in labels.iter().enumerate() {
            let start = (y - 1) * width;
            out.row_mut(i)
                .slice_mut(ndarray::s![start..start + width])
                .assign(&psi.row(i));
        }
        Ok(out)
    }
}

/// Kronecker placement `e_y ⊗ ψ` for a 1-based label.
pub fn embed(psi: &Array1<f64>, y: usize, num_classes: usize) -> Array1<f64> {
    let width = psi.len();
    let mut out = Array1::zeros(width * num_classes);
    out.slice_mut(ndarray::s![(y - 1) * width..y * width]).assign(psi);
    out
}

/// Per-class scores `Φ(x, y)ᵀμ = Ψ(x)ᵀμ_y` for `y = 1..=|Y|`.
pub fn class_scores(psi: ArrayView1<'_, f64>, mu: ArrayView1<'_, f64>, num_classes: usize) -> Vec<f64> {
    let width = psi.len();
    (0..num_classes)
        .map(|c| psi.dot(&mu.slice(ndarray::s![c * width..(c + 1) * width])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn rff(d: usize, big_d: usize, seed: u64) -> FeatureMap {
        FeatureMap::new(FeatureMapSpec::random_fourier(d, 3, big_d, None, seed)).unwrap()
    }

    #[test]
    fn rff_at_origin_is_cos_one_sin_zero() {
        let map = rff(4, 5, 1);
        let psi = map.scalar_features(Array1::zeros(4).view()).unwrap();
        for k in 0..5 {
            assert_eq!(psi[2 * k], 1.0);
            assert_eq!(psi[2 * k + 1], 0.0);
        }
    }

    #[test]
    fn rff_norm_equals_frequency_count() {
        let map = rff(3, 17, 9);
        let x = array![0.3, -1.2, 2.5];
        let psi = map.scalar_features(x.view()).unwrap();
        assert!((psi.dot(&psi) - 17.0).abs() < 1e-12);
        assert!(psi.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn default_sigma_is_sqrt_half_dimension() {
        let spec = FeatureMapSpec::random_fourier(8, 2, 10, None, 0);
        match spec.kind {
            FeatureKind::RandomFourier { sigma, .. } => assert_eq!(sigma, 2.0),
            _ => unreachable!(),
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let map = rff(3, 2, 0);
        assert!(matches!(
            map.scalar_features(array![1.0, 2.0].view()),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn kronecker_placement() {
        let map = FeatureMap::new(FeatureMapSpec::identity_with_bound(2, 3, 2.0)).unwrap();
        let phi = map.feature_map(array![1.0, 2.0].view(), 2).unwrap();
        assert_eq!(phi, array![0.0, 0.0, 1.0, 2.0, 0.0, 0.0]);
        assert!(matches!(
            map.feature_map(array![1.0, 2.0].view(), 4),
            Err(Error::LabelOutOfRange { label: 4, .. })
        ));
        assert!(map.feature_map(array![1.0, 2.0].view(), 0).is_err());
    }

    #[test]
    fn blocks_are_orthogonal_and_sum_to_repeated_psi() {
        let map = rff(2, 4, 3);
        let x = array![0.7, -0.1];
        let psi = map.scalar_features(x.view()).unwrap();
        let phis: Vec<_> = (1..=3).map(|y| map.feature_map(x.view(), y).unwrap()).collect();
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    assert_eq!(phis[a].dot(&phis[b]), 0.0);
                }
            }
        }
        let total = phis.iter().fold(Array1::<f64>::zeros(map.dim()), |acc, p| acc + p);
        for c in 0..3 {
            assert_eq!(total.slice(ndarray::s![c * 8..(c + 1) * 8]), psi);
        }
    }

    #[test]
    fn frequencies_are_reproducible_from_seed() {
        assert_eq!(rff(3, 6, 42), rff(3, 6, 42));
        assert_ne!(rff(3, 6, 42).frequencies(), rff(3, 6, 43).frequencies());
    }

    #[test]
    fn constant_feature_extends_block() {
        let spec = FeatureMapSpec::random_fourier(2, 2, 3, Some(1.0), 0).with_constant_feature(true);
        assert_eq!(spec.block_len(), 7);
        let map = FeatureMap::new(spec).unwrap();
        let psi = map.scalar_features(array![0.0, 0.0].view()).unwrap();
        assert_eq!(psi[0], 1.0);
    }

    #[test]
    fn scalar_matrix_matches_rowwise_evaluation() {
        let map = rff(3, 5, 8);
        let x = Array2::from_shape_fn((4, 3), |(i, j)| (i as f64 - j as f64) * 0.4);
        let m = map.scalar_matrix(x.view()).unwrap();
        for i in 0..4 {
            let row = map.scalar_features(x.row(i)).unwrap();
            for (a, b) in m.row(i).iter().zip(row.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_bound_is_max_abs_entry() {
        let spec = FeatureMapSpec::identity(2, array![[0.5, -3.0], [2.0, 1.0]].view());
        assert_eq!(spec.feature_bound, 3.0);
    }
}

//! Learning and bound problems in the canonical piecewise-linear form
//!
//! ```text
//! f(μ) = constant + aᵀμ + λᵀ|μ| + max{Fμ + b}
//! ```
//!
//! The minimax-risk problem has one row per anchor instance and nonempty label
//! subset; the bound problems have one row per anchor instance and label.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::UncertaintySet;
use crate::features::{class_scores, FeatureMap};

/// Largest label count for which label subsets are enumerated into rows.
pub const SUBSET_CAP: usize = 12;

/// Convex objective exposing a value and one subgradient per query point.
pub trait ConvexObjective {
    fn dim(&self) -> usize;

    /// Additive constant reported with objective values.
    fn offset(&self) -> f64 {
        0.0
    }

    /// Objective value at `mu` without [`offset`](Self::offset); a subgradient
    /// at `mu` is written to `grad`.
    fn evaluate(&self, mu: ArrayView1<'_, f64>, grad: &mut Array1<f64>) -> f64;
}

/// `sign` with `sign(0) = 0`.
#[inline]
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Index of the first maximal entry.
pub fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// `g = a + λ ⊙ s + row`, the shared subgradient assembly.
#[inline]
pub(crate) fn assemble_subgradient(
    a: ArrayView1<'_, f64>,
    lambda: ArrayView1<'_, f64>,
    signs: ArrayView1<'_, f64>,
    row: ArrayView1<'_, f64>,
    out: &mut Array1<f64>,
) {
    ndarray::Zip::from(out)
        .and(a)
        .and(lambda)
        .and(signs)
        .and(row)
        .for_each(|g, &a, &l, &s, &r| *g = a + l * s + r);
}

/// `aᵀμ + λᵀ|μ|`
#[inline]
pub(crate) fn linear_and_penalty(a: ArrayView1<'_, f64>, lambda: ArrayView1<'_, f64>, mu: ArrayView1<'_, f64>) -> f64 {
    let mut acc = 0.0;
    for ((a, l), m) in a.iter().zip(lambda.iter()).zip(mu.iter()) {
        acc += a * m + l * m.abs();
    }
    acc
}

/// `max_C (Σ_{y∈C} score_y − 1)/|C|` over nonempty label subsets, by
/// sorting the scores and scanning prefix sums. Also returns the size `k` of
/// the maximizing subset; the subset itself is the `k` largest scores.
pub fn phi_from_scores_with_size(scores: &[f64]) -> (f64, usize) {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut best = f64::NEG_INFINITY;
    let mut best_k = 1;
    let mut prefix = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        prefix += v;
        let k = i + 1;
        let value = (prefix - 1.0) / k as f64;
        if value > best {
            best = value;
            best_k = k;
        }
    }
    (best, best_k)
}

pub fn phi_from_scores(scores: &[f64]) -> f64 {
    phi_from_scores_with_size(scores).0
}

/// Labels (0-based) of the `k` largest scores, ties to the smaller label.
fn top_labels(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// `φ(μ, x)` for a single instance.
pub fn phi_at_x(mu: ArrayView1<'_, f64>, x: ArrayView1<'_, f64>, map: &FeatureMap) -> Result<f64> {
    check_mu(mu, map)?;
    let psi = map.scalar_features(x)?;
    Ok(phi_from_scores(&class_scores(psi.view(), mu, map.num_classes())))
}

/// `φ(μ)`: the maximum of `φ(μ, x)` over the anchor instances.
pub fn phi(mu: ArrayView1<'_, f64>, anchor: ArrayView2<'_, f64>, map: &FeatureMap) -> Result<f64> {
    check_mu(mu, map)?;
    if anchor.nrows() == 0 {
        return Err(Error::InvalidInput("anchor instance set is empty".into()));
    }
    let psi = map.scalar_matrix(anchor)?;
    Ok(psi
        .outer_iter()
        .map(|p| phi_from_scores(&class_scores(p, mu, map.num_classes())))
        .fold(f64::NEG_INFINITY, f64::max))
}

fn check_mu(mu: ArrayView1<'_, f64>, map: &FeatureMap) -> Result<()> {
    if mu.len() != map.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.dim(),
            found: mu.len(),
        });
    }
    Ok(())
}

/// How the minimized value relates to the reported quantity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// The minimum is the reported value.
    Minimize,
    /// The problem encodes `max g` as `min −g`; report the negated minimum.
    NegatedMaximize,
}

/// Generating instance and label set of a row. Bit `c` of `labels` stands
/// for label `c + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowOrigin {
    pub instance: usize,
    pub labels: u32,
}

/// Rows of the form `Σ_c w_c (e_c ⊗ Ψ(x))`, which lets `FFᵀ` be built from
/// the instance Gram matrix.
#[derive(Clone, Debug)]
struct BlockRows {
    psi: Array2<f64>,
    /// `p × |Y|` class weights per row
    weights: Array2<f64>,
}

#[derive(Clone, Debug)]
pub struct PiecewiseLinearProblem {
    pub a: Array1<f64>,
    pub lambda: Array1<f64>,
    pub f: Array2<f64>,
    pub b: Array1<f64>,
    pub constant: f64,
    pub sign: SignConvention,
    pub rows: Vec<RowOrigin>,
    structure: Option<BlockRows>,
}

impl PiecewiseLinearProblem {
    pub fn new(a: Array1<f64>, lambda: Array1<f64>, f: Array2<f64>, b: Array1<f64>, constant: f64) -> Result<Self> {
        let m = a.len();
        if lambda.len() != m || f.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: if lambda.len() != m { lambda.len() } else { f.ncols() },
            });
        }
        if f.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: f.nrows(),
                found: b.len(),
            });
        }
        if f.nrows() == 0 {
            return Err(Error::InvalidInput("piecewise-linear problem needs at least one row".into()));
        }
        if lambda.iter().any(|&l| !(l >= 0.0)) {
            return Err(Error::InvalidInput("L1 weights must be nonnegative".into()));
        }
        let rows = (0..f.nrows())
            .map(|i| RowOrigin {
                instance: i,
                labels: 0,
            })
            .collect();
        Ok(Self {
            a,
            lambda,
            f: f.as_standard_layout().into_owned(),
            b,
            constant,
            sign: SignConvention::Minimize,
            rows,
            structure: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    /// `Fμ + b`
    pub fn row_values(&self, mu: ArrayView1<'_, f64>) -> Array1<f64> {
        self.f.dot(&mu) + &self.b
    }

    /// Objective without the constant.
    pub fn raw_value(&self, mu: ArrayView1<'_, f64>) -> f64 {
        let v = self.row_values(mu);
        let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        linear_and_penalty(self.a.view(), self.lambda.view(), mu) + top
    }

    /// `f(μ)` including the constant.
    pub fn value(&self, mu: ArrayView1<'_, f64>) -> f64 {
        self.constant + self.raw_value(mu)
    }

    /// Converts an objective value (constant included) to the reported quantity.
    pub fn reported(&self, value: f64) -> f64 {
        match self.sign {
            SignConvention::Minimize => value,
            SignConvention::NegatedMaximize => -value,
        }
    }

    /// Subgradient `a + λ ⊙ sign(μ) + F[i(μ), :]` and the active row `i(μ)`
    /// (lowest index among maximizers).
    pub fn subgradient(&self, mu: ArrayView1<'_, f64>) -> (Array1<f64>, usize) {
        let v = self.row_values(mu);
        let i = argmax_first(v.as_slice().expect("contiguous"));
        let signs = mu.mapv(sign);
        let mut g = Array1::zeros(self.dim());
        assemble_subgradient(self.a.view(), self.lambda.view(), signs.view(), self.f.row(i), &mut g);
        (g, i)
    }

    /// `G = FFᵀ`, built from the instance Gram matrix when rows come from a
    /// feature map.
    pub fn gram(&self) -> Array2<f64> {
        match &self.structure {
            Some(st) => {
                let kernel = st.psi.dot(&st.psi.t());
                let p = self.num_rows();
                let cross = st.weights.dot(&st.weights.t());
                let mut g = Array2::zeros((p, p));
                for i in 0..p {
                    let xi = self.rows[i].instance;
                    for j in 0..p {
                        g[[i, j]] = cross[[i, j]] * kernel[[xi, self.rows[j].instance]];
                    }
                }
                g
            }
            None => self.f.dot(&self.f.t()),
        }
    }
}

impl ConvexObjective for PiecewiseLinearProblem {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn offset(&self) -> f64 {
        self.constant
    }

    fn evaluate(&self, mu: ArrayView1<'_, f64>, grad: &mut Array1<f64>) -> f64 {
        let v = self.row_values(mu);
        let i = argmax_first(v.as_slice().expect("contiguous"));
        let signs = mu.mapv(sign);
        assemble_subgradient(self.a.view(), self.lambda.view(), signs.view(), self.f.row(i), grad);
        linear_and_penalty(self.a.view(), self.lambda.view(), mu) + v[i]
    }
}

fn check_set(u: &UncertaintySet, map: &FeatureMap, anchor: ArrayView2<'_, f64>) -> Result<()> {
    if u.dim() != map.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.dim(),
            found: u.dim(),
        });
    }
    if anchor.nrows() == 0 {
        return Err(Error::InvalidInput("anchor instance set is empty".into()));
    }
    Ok(())
}

fn place_rows(psi: &Array2<f64>, weights: &Array2<f64>, rows: &[RowOrigin], width: usize) -> Array2<f64> {
    let num_classes = weights.ncols();
    let mut f = Array2::zeros((rows.len(), width * num_classes));
    for (r, origin) in rows.iter().enumerate() {
        let p = psi.row(origin.instance);
        for c in 0..num_classes {
            let w = weights[[r, c]];
            if w != 0.0 {
                let mut block = f.slice_mut(s![r, c * width..(c + 1) * width]);
                block.zip_mut_with(&p, |o, &v| *o = w * v);
            }
        }
    }
    f
}

/// Minimax-risk problem: `constant = 1`, `a = −τ`, one row
/// `(1/|C|) Σ_{y∈C} Φ(x, y)` with offset `−1/|C|` per anchor instance and
/// nonempty `C ⊆ Y` (instance-major, subsets by ascending bit mask).
pub fn build_learning_problem(
    u: &UncertaintySet,
    anchor: ArrayView2<'_, f64>,
    map: &FeatureMap,
) -> Result<PiecewiseLinearProblem> {
    check_set(u, map, anchor)?;
    let k = map.num_classes();
    if k > SUBSET_CAP {
        return Err(Error::SubsetCapExceeded {
            num_classes: k,
            cap: SUBSET_CAP,
        });
    }
    let psi = map.scalar_matrix(anchor)?;
    let subsets = (1u32 << k) - 1;
    let p = anchor.nrows() * subsets as usize;
    let mut rows = Vec::with_capacity(p);
    let mut weights = Array2::zeros((p, k));
    let mut b = Array1::zeros(p);
    for x in 0..anchor.nrows() {
        for mask in 1..=subsets {
            let r = rows.len();
            let size = mask.count_ones() as f64;
            for c in 0..k {
                if mask & (1 << c) != 0 {
                    weights[[r, c]] = 1.0 / size;
                }
            }
            b[r] = -1.0 / size;
            rows.push(RowOrigin {
                instance: x,
                labels: mask,
            });
        }
    }
    let f = place_rows(&psi, &weights, &rows, map.block_len());
    Ok(PiecewiseLinearProblem {
        a: -&u.tau,
        lambda: u.lambda.clone(),
        f,
        b,
        constant: 1.0,
        sign: SignConvention::Minimize,
        rows,
        structure: Some(BlockRows { psi, weights }),
    })
}

fn check_rule(h: ArrayView2<'_, f64>, s: usize, k: usize) -> Result<()> {
    if h.dim() != (s, k) {
        return Err(Error::InvalidInput(format!(
            "rule table must be {s} × {k}, got {} × {}",
            h.nrows(),
            h.ncols()
        )));
    }
    if let Some(v) = h.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
        return Err(Error::InvalidInput(format!("rule probability {v} outside [0, 1]")));
    }
    Ok(())
}

fn bound_rows(anchor_len: usize, k: usize) -> (Vec<RowOrigin>, Array2<f64>) {
    let p = anchor_len * k;
    let mut rows = Vec::with_capacity(p);
    let mut weights = Array2::zeros((p, k));
    for x in 0..anchor_len {
        for c in 0..k {
            weights[[rows.len(), c]] = 1.0;
            rows.push(RowOrigin {
                instance: x,
                labels: 1 << c,
            });
        }
    }
    (rows, weights)
}

/// Upper bound `R̄(U, h)`: `constant = 1`, `a = −τ`, rows `Φ(x, y)` with
/// offsets `−h(y|x)`. `h` holds one row of label probabilities per anchor instance.
pub fn build_upper_bound_problem(
    u: &UncertaintySet,
    anchor: ArrayView2<'_, f64>,
    map: &FeatureMap,
    h: ArrayView2<'_, f64>,
) -> Result<PiecewiseLinearProblem> {
    check_set(u, map, anchor)?;
    let k = map.num_classes();
    check_rule(h, anchor.nrows(), k)?;
    let psi = map.scalar_matrix(anchor)?;
    let (rows, weights) = bound_rows(anchor.nrows(), k);
    let f = place_rows(&psi, &weights, &rows, map.block_len());
    let b = rows
        .iter()
        .map(|o| -h[[o.instance, o.labels.trailing_zeros() as usize]])
        .collect();
    Ok(PiecewiseLinearProblem {
        a: -&u.tau,
        lambda: u.lambda.clone(),
        f,
        b,
        constant: 1.0,
        sign: SignConvention::Minimize,
        rows,
        structure: Some(BlockRows { psi, weights }),
    })
}

/// Lower bound `R̲(U, h)` encoded as `min −(…)`: `constant = −1`, `a = τ`,
/// rows `−Φ(x, y)` with offsets `h(y|x)`. The reported value is the negated minimum.
pub fn build_lower_bound_problem(
    u: &UncertaintySet,
    anchor: ArrayView2<'_, f64>,
    map: &FeatureMap,
    h: ArrayView2<'_, f64>,
) -> Result<PiecewiseLinearProblem> {
    check_set(u, map, anchor)?;
    let k = map.num_classes();
    check_rule(h, anchor.nrows(), k)?;
    let psi = map.scalar_matrix(anchor)?;
    let (rows, weights) = bound_rows(anchor.nrows(), k);
    let weights = -weights;
    let f = place_rows(&psi, &weights, &rows, map.block_len());
    let b = rows
        .iter()
        .map(|o| h[[o.instance, o.labels.trailing_zeros() as usize]])
        .collect();
    Ok(PiecewiseLinearProblem {
        a: u.tau.clone(),
        lambda: u.lambda.clone(),
        f,
        b,
        constant: -1.0,
        sign: SignConvention::NegatedMaximize,
        rows,
        structure: Some(BlockRows { psi, weights }),
    })
}

/// Minimax-risk objective evaluated with sorted scores instead of enumerated
/// subsets; usable with any label count.
#[derive(Clone, Debug)]
pub struct LearningObjective {
    tau: Array1<f64>,
    lambda: Array1<f64>,
    psi: Array2<f64>,
    num_classes: usize,
}

impl LearningObjective {
    pub fn new(u: &UncertaintySet, anchor: ArrayView2<'_, f64>, map: &FeatureMap) -> Result<Self> {
        check_set(u, map, anchor)?;
        Ok(Self {
            tau: u.tau.clone(),
            lambda: u.lambda.clone(),
            psi: map.scalar_matrix(anchor)?,
            num_classes: map.num_classes(),
        })
    }
}

impl ConvexObjective for LearningObjective {
    fn dim(&self) -> usize {
        self.tau.len()
    }

    fn offset(&self) -> f64 {
        1.0
    }

    fn evaluate(&self, mu: ArrayView1<'_, f64>, grad: &mut Array1<f64>) -> f64 {
        let mut best = (f64::NEG_INFINITY, 0, 1, Vec::new());
        for (x, psi) in self.psi.outer_iter().enumerate() {
            let scores = class_scores(psi, mu, self.num_classes);
            let (value, k) = phi_from_scores_with_size(&scores);
            if value > best.0 {
                best = (value, x, k, scores);
            }
        }
        let (phi, x, k, scores) = best;
        let width = self.psi.ncols();
        for ((g, &t), (&l, &m)) in grad.iter_mut().zip(&self.tau).zip(self.lambda.iter().zip(mu.iter())) {
            *g = -t + l * sign(m);
        }
        let psi = self.psi.row(x);
        for c in top_labels(&scores, k) {
            let mut block = grad.slice_mut(s![c * width..(c + 1) * width]);
            block.scaled_add(1.0 / k as f64, &psi);
        }
        linear_and_penalty((-&self.tau).view(), self.lambda.view(), mu) + phi
    }
}

/// Objective of the fixed-marginal problem,
/// `1 − τᵀμ + (1/n) Σ_i φ(μ, x_i) + λᵀ|μ|`.
#[derive(Clone, Debug)]
pub struct FixedMarginalObjective {
    tau: Array1<f64>,
    lambda: Array1<f64>,
    psi: Array2<f64>,
    num_classes: usize,
}

impl ConvexObjective for FixedMarginalObjective {
    fn dim(&self) -> usize {
        self.tau.len()
    }

    fn offset(&self) -> f64 {
        1.0
    }

    fn evaluate(&self, mu: ArrayView1<'_, f64>, grad: &mut Array1<f64>) -> f64 {
        let n = self.psi.nrows() as f64;
        let width = self.psi.ncols();
        for ((g, &t), (&l, &m)) in grad.iter_mut().zip(&self.tau).zip(self.lambda.iter().zip(mu.iter())) {
            *g = -t + l * sign(m);
        }
        let mut total = 0.0;
        for psi in self.psi.outer_iter() {
            let scores = class_scores(psi, mu, self.num_classes);
            let (value, k) = phi_from_scores_with_size(&scores);
            total += value;
            for c in top_labels(&scores, k) {
                let mut block = grad.slice_mut(s![c * width..(c + 1) * width]);
                block.scaled_add(1.0 / (k as f64 * n), &psi);
            }
        }
        linear_and_penalty((-&self.tau).view(), self.lambda.view(), mu) + total / n
    }
}

/// Fixed-marginal objective over the training instances.
pub fn build_fixed_marginal_problem(
    u: &UncertaintySet,
    train_instances: ArrayView2<'_, f64>,
    map: &FeatureMap,
) -> Result<FixedMarginalObjective> {
    check_set(u, map, train_instances)?;
    Ok(FixedMarginalObjective {
        tau: u.tau.clone(),
        lambda: u.lambda.clone(),
        psi: map.scalar_matrix(train_instances)?,
        num_classes: map.num_classes(),
    })
}

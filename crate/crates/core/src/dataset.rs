//! Tabular classification data: CSV loading, standardization and
//! stratified partitions.
//!
//! Labels are stored 1-based (`1..=num_classes`) in first-appearance order of
//! the original label strings, which are kept in [`Dataset::label_names`].

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    instances: Array2<f64>,
    labels: Vec<usize>,
    label_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from already-encoded labels in `1..=label_names.len()`.
    pub fn new(instances: Array2<f64>, labels: Vec<usize>, label_names: Vec<String>) -> Result<Self> {
        if instances.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: instances.nrows(),
                found: labels.len(),
            });
        }
        if label_names.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "at least 2 classes are required, found {}",
                label_names.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l == 0 || l > label_names.len()) {
            return Err(Error::LabelOutOfRange {
                label,
                num_classes: label_names.len(),
            });
        }
        if let Some(((row, col), _)) = instances.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Parse {
                row: row + 1,
                column: col + 1,
                message: "non-finite value".into(),
            });
        }
        Ok(Self {
            instances,
            labels,
            label_names,
        })
    }

    /// Builds a dataset whose label names are simply `"1"`, `"2"`, ...
    pub fn from_encoded(instances: Array2<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let names = (1..=num_classes).map(|c| c.to_string()).collect();
        Self::new(instances, labels, names)
    }

    pub fn instances(&self) -> ArrayView2<'_, f64> {
        self.instances.view()
    }

    pub fn instance(&self, i: usize) -> ArrayView1<'_, f64> {
        self.instances.row(i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.instances.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of samples per class, indexed by `label - 1`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &y in &self.labels {
            counts[y - 1] += 1;
        }
        counts
    }

    /// Rows selected by `indices`, in the given order. Label names are kept.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            instances: self.instances.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            label_names: self.label_names.clone(),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file)
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for (row, &label) in self.instances.outer_iter().zip(&self.labels) {
            let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            record.push(self.label_names[label - 1].clone());
            out.write_record(&record)?;
        }
        out.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Loads a comma-separated file whose last column is the label.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, has_header)
}

pub fn read_csv<R: Read>(reader: R, has_header: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut label_names: Vec<String> = Vec::new();
    let mut width = None;

    for (i, record) in rdr.records().enumerate() {
        let row = i + 1 + usize::from(has_header);
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.len() < 2 {
            return Err(Error::Parse {
                row,
                column: record.len(),
                message: "expected at least one feature column and a label column".into(),
            });
        }
        let d = record.len() - 1;
        match width {
            None => width = Some(d),
            Some(w) if w != d => {
                return Err(Error::Parse {
                    row,
                    column: record.len(),
                    message: format!("expected {} columns, found {}", w + 1, d + 1),
                })
            }
            _ => {}
        }
        for (j, field) in record.iter().take(d).enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                column: j + 1,
                message: format!("cannot parse {field:?} as a real number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: j + 1,
                    message: format!("non-finite value {field:?}"),
                });
            }
            values.push(v);
        }
        let name = &record[d];
        let label = match label_names.iter().position(|n| n == name) {
            Some(pos) => pos + 1,
            None => {
                label_names.push(name.to_string());
                label_names.len()
            }
        };
        labels.push(label);
    }

    let d = width.ok_or_else(|| Error::InvalidInput("empty data file".into()))?;
    if label_names.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "at least 2 distinct labels are required, found {}",
            label_names.len()
        )));
    }
    let instances = Array2::from_shape_vec((labels.len(), d), values)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(Dataset {
        instances,
        labels,
        label_names,
    })
}

/// Loads unlabeled instances. With `dim` set, rows of `dim + 1` columns are
/// read as labeled and the last column is dropped.
pub fn load_instances(path: impl AsRef<Path>, has_header: bool, dim: Option<usize>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_instances(file, has_header, dim)
}

pub fn read_instances<R: Read>(reader: R, has_header: bool, dim: Option<usize>) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut width = dim;
    let mut rows = 0;
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1 + usize::from(has_header);
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w && record.len() != w + 1 {
            return Err(Error::Parse {
                row,
                column: record.len(),
                message: format!("expected {w} feature columns, found {}", record.len()),
            });
        }
        for (j, field) in record.iter().take(w).enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                column: j + 1,
                message: format!("cannot parse {field:?} as a real number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: j + 1,
                    message: format!("non-finite value {field:?}"),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    let d = width.filter(|_| rows > 0).ok_or_else(|| Error::InvalidInput("empty data file".into()))?;
    Array2::from_shape_vec((rows, d), values).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Per-column standardization parameters estimated on training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormalizationStats {
    /// Leaves instances unchanged.
    pub fn identity(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    /// Population mean and deviation per column; constant columns get deviation 1.
    pub fn fit(instances: ArrayView2<'_, f64>) -> Result<Self> {
        if instances.nrows() == 0 {
            return Err(Error::InvalidInput("cannot normalize an empty dataset".into()));
        }
        let mean = instances.mean_axis(Axis(0)).expect("nonempty");
        let std = instances
            .axis_iter(Axis(1))
            .zip(mean.iter())
            .map(|(col, &m)| {
                let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / col.len() as f64;
                let sd = var.sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self {
            mean: mean.to_vec(),
            std,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn apply_matrix(&self, instances: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if instances.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: instances.ncols(),
            });
        }
        let mut out = instances.to_owned();
        for mut row in out.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        Ok(Dataset {
            instances: self.apply_matrix(data.instances())?,
            labels: data.labels.clone(),
            label_names: data.label_names.clone(),
        })
    }
}

pub fn fit_normalizer(train: &Dataset) -> Result<NormalizationStats> {
    NormalizationStats::fit(train.instances())
}

pub fn apply_normalizer(stats: &NormalizationStats, data: &Dataset) -> Result<Dataset> {
    stats.apply(data)
}

/// Train/test index partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn indices_by_class(data: &Dataset) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); data.num_classes()];
    for (i, &y) in data.labels.iter().enumerate() {
        by_class[y - 1].push(i);
    }
    by_class
}

/// Stratified random partition: each class contributes `round(n_c * test_fraction)`
/// test samples, clamped so that both sides keep at least one sample of the class.
pub fn stratified_split_indices(data: &Dataset, test_fraction: f64, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (c, mut members) in indices_by_class(data).into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "class {:?} has a single sample and cannot be stratified",
                data.label_names[c]
            )));
        }
        members.shuffle(&mut rng);
        let n_test = ((members.len() as f64 * test_fraction).round() as usize).clamp(1, members.len() - 1);
        split.test.extend_from_slice(&members[..n_test]);
        split.train.extend_from_slice(&members[n_test..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

pub fn stratified_split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let split = stratified_split_indices(data, test_fraction, seed)?;
    Ok((data.subset(&split.train), data.subset(&split.test)))
}

/// Stratified k-fold partition. Each class is shuffled and dealt round-robin
/// over the folds, so fold class counts differ by at most one.
pub fn stratified_kfold(data: &Dataset, folds: usize, seed: u64) -> Result<Vec<Split>> {
    if folds < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {folds}")));
    }
    if data.n() < folds {
        return Err(Error::InvalidInput(format!(
            "{} samples cannot be split into {folds} folds",
            data.n()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; data.n()];
    let mut offset = 0;
    for mut members in indices_by_class(data) {
        members.shuffle(&mut rng);
        for (k, &i) in members.iter().enumerate() {
            assignment[i] = (offset + k) % folds;
        }
        offset += members.len();
    }
    Ok((0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..data.n()).partition(|&i| assignment[i] == f);
            Split { train, test }
        })
        .collect())
}

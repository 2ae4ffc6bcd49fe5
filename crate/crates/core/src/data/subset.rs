use ndarray::{Array2, ArrayView2, Axis};

use super::FeatureDataset;
use crate::error::{Error, Result};
use crate::multiclass::BinaryTask;

/// Per-class sample counts for labels `0..k`.
pub fn class_histogram(labels: &[usize], k: usize) -> Vec<usize> {
    let mut h = vec![0; k];
    for &l in labels {
        if l < k {
            h[l] += 1;
        }
    }
    h
}

/// Keeps the samples labelled `0..k`. Every one of those classes must occur.
pub fn filter_classes(ds: &FeatureDataset, k: usize) -> Result<FeatureDataset> {
    if !(2..=10).contains(&k) {
        return Err(Error::Usage(format!("K must lie in 2..=10, got {k}")));
    }
    let hist = class_histogram(&ds.labels, k);
    if let Some(missing) = hist.iter().position(|&c| c == 0) {
        return Err(Error::Usage(format!("class {missing} has no samples in this split")));
    }
    let keep: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] < k).collect();
    if keep.len() == ds.len() {
        return Ok(ds.clone());
    }
    Ok(FeatureDataset {
        features: ds.features.select(Axis(0), &keep),
        labels: keep.iter().map(|&i| ds.labels[i]).collect(),
        stats: ds.stats.clone(),
    })
}

/// A binary view over a feature matrix: selected rows and their 0/1 labels.
#[derive(Debug, Clone)]
pub struct BinarySet<'a> {
    features: ArrayView2<'a, f64>,
    rows: Vec<usize>,
    labels: Vec<f64>,
    pub task: BinaryTask,
}

impl<'a> BinarySet<'a> {
    /// Builds a set directly from rows of `features` and their binary labels.
    pub fn new(features: ArrayView2<'a, f64>, rows: Vec<usize>, labels: Vec<f64>, task: BinaryTask) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Shape {
                context: "binary set labels",
                expected: rows.len(),
                actual: labels.len(),
            });
        }
        if let Some(&r) = rows.iter().find(|&&r| r >= features.nrows()) {
            return Err(Error::Usage(format!(
                "row {r} outside a {}-row matrix",
                features.nrows()
            )));
        }
        if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::Usage("binary labels must be 0 or 1".into()));
        }
        Ok(Self {
            features,
            rows,
            labels,
            task,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Row indices into the source matrix.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn count_label(&self, label: f64) -> usize {
        self.labels.iter().filter(|&&y| y == label).count()
    }

    pub fn sample(&self, i: usize) -> ndarray::ArrayView1<'_, f64> {
        self.features.row(self.rows[i])
    }

    /// Copies the requested samples (positions within this set) into a
    /// contiguous batch.
    pub fn gather(&self, positions: &[usize]) -> (Array2<f64>, Vec<f64>) {
        let mut xs = Array2::zeros((positions.len(), self.dim()));
        let mut ys = Vec::with_capacity(positions.len());
        for (mut dst, &p) in xs.rows_mut().into_iter().zip(positions) {
            dst.assign(&self.features.row(self.rows[p]));
            ys.push(self.labels[p]);
        }
        (xs, ys)
    }
}

/// Drops samples outside the task's classes and maps the rest to 0/1.
pub fn relabel_for_task<'a>(ds: &'a FeatureDataset, task: &BinaryTask) -> Result<BinarySet<'a>> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, &l) in ds.labels.iter().enumerate() {
        if let Some(y) = task.label_of(l) {
            rows.push(i);
            labels.push(y);
        }
    }
    let set = BinarySet::new(ds.features.view(), rows, labels, task.clone())?;
    for (label, classes) in [(0.0, &task.zero_classes), (1.0, &task.one_classes)] {
        if set.count_label(label) == 0 {
            return Err(Error::Usage(format!(
                "task {} has no samples for label {label} (classes {:?})",
                task.id, classes
            )));
        }
    }
    Ok(set)
}

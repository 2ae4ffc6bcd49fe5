use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};

use super::RawDataset;
use crate::error::{Error, Result};

/// Lower bound on per-feature standard deviations (constant border pixels).
pub const STD_FLOOR: f64 = 1e-8;
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Per-feature z-scoring statistics, always computed on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardization {
    pub fn fit(features: &Array2<f64>) -> Self {
        let mean = features
            .mean_axis(Axis(0))
            .unwrap_or_else(|| Array1::zeros(features.ncols()));
        let std = features.std_axis(Axis(0), 0.0).mapv(|s| s.max(STD_FLOOR));
        Self { mean, std }
    }
}

#[derive(Debug, Clone)]
pub struct FeatureDataset {
    /// `count × N`, every row unit-norm.
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    /// Shared between the splits produced by one [`preprocess`] call.
    pub stats: Arc<Standardization>,
}

impl FeatureDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct PreprocessReport {
    /// Samples whose standardized vector had zero norm and were replaced by
    /// the uniform unit vector, per split.
    pub zero_norm_train: usize,
    pub zero_norm_test: usize,
}

pub fn grayscale_pixel(r: u8, g: u8, b: u8) -> f64 {
    LUMA[0] * r as f64 + LUMA[1] * g as f64 + LUMA[2] * b as f64
}

/// Luma of an interleaved `H × W × 3` image.
pub fn grayscale(pixels: &[u8], channels: usize) -> Result<Vec<f64>> {
    if channels != 3 {
        return Err(Error::Usage(format!(
            "grayscale conversion needs 3 channels, got {channels}"
        )));
    }
    if !pixels.len().is_multiple_of(3) {
        return Err(Error::Usage(format!(
            "pixel buffer of {} bytes is not a whole number of RGB triples",
            pixels.len()
        )));
    }
    Ok(pixels
        .chunks_exact(3)
        .map(|p| grayscale_pixel(p[0], p[1], p[2]))
        .collect())
}

/// Flattened intensities, greyscaled when the images carry colour.
fn flatten(raw: &RawDataset) -> Result<Array2<f64>> {
    let n = raw.height * raw.width;
    let mut out = Array2::<f64>::zeros((raw.count, n));
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let img = raw.image(i);
        match raw.channels {
            1 => row.iter_mut().zip(img).for_each(|(o, &v)| *o = v as f64),
            3 => row
                .iter_mut()
                .zip(img.chunks_exact(3))
                .for_each(|(o, p)| *o = grayscale_pixel(p[0], p[1], p[2])),
            c => {
                return Err(Error::Data(format!("unsupported channel count {c}")));
            }
        }
    }
    Ok(out)
}

fn standardize_and_normalize(features: &mut Array2<f64>, stats: &Standardization) -> usize {
    let n = features.ncols();
    let uniform = 1.0 / (n as f64).sqrt();
    let mut replaced = 0;
    for mut row in features.rows_mut() {
        row.zip_mut_with(&stats.mean, |v, &m| *v -= m);
        row.zip_mut_with(&stats.std, |v, &s| *v /= s);
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 && norm.is_finite() {
            row.mapv_inplace(|v| v / norm);
        } else {
            row.fill(uniform);
            replaced += 1;
        }
    }
    replaced
}

/// Greyscale (colour only) → flatten → z-score with train statistics →
/// per-sample L2 normalization. Both splits share one [`Standardization`].
pub fn preprocess(train: &RawDataset, test: &RawDataset) -> Result<(FeatureDataset, FeatureDataset, PreprocessReport)> {
    if (train.height, train.width, train.channels) != (test.height, test.width, test.channels) {
        return Err(Error::Data(format!(
            "train images are {}x{}x{} but test images are {}x{}x{}",
            train.height, train.width, train.channels, test.height, test.width, test.channels
        )));
    }
    if train.count == 0 {
        return Err(Error::Data("training split is empty".into()));
    }
    let mut tr = flatten(train)?;
    let mut te = flatten(test)?;
    let stats = Arc::new(Standardization::fit(&tr));
    let report = PreprocessReport {
        zero_norm_train: standardize_and_normalize(&mut tr, &stats),
        zero_norm_test: standardize_and_normalize(&mut te, &stats),
    };
    let labels = |raw: &RawDataset| raw.labels.iter().map(|&l| l as usize).collect();
    Ok((
        FeatureDataset {
            features: tr,
            labels: labels(train),
            stats: Arc::clone(&stats),
        },
        FeatureDataset {
            features: te,
            labels: labels(test),
            stats,
        },
        report,
    ))
}

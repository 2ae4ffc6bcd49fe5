//! Small generated datasets for tests, demos and smoke runs.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{FeatureDataset, Standardization, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
use crate::error::{Error, Result};

/// `per_class` unit vectors per class, scattered around a random class
/// centre in `dim` dimensions. Labels cycle `0, 1, …, k−1`.
pub fn gaussian_classes(k: usize, per_class: usize, dim: usize, spread: f64, seed: u64) -> FeatureDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres = Array2::from_shape_simple_fn((k, dim), || rng.sample::<f64, _>(StandardNormal));
    let n = k * per_class;
    let mut features = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for (i, mut row) in features.rows_mut().into_iter().enumerate() {
        let c = i % k;
        for (j, v) in row.iter_mut().enumerate() {
            *v = centres[[c, j]] + spread * rng.sample::<f64, _>(StandardNormal);
        }
        let norm = row.dot(&row).sqrt();
        row.mapv_inplace(|v| v / norm);
        labels.push(c);
    }
    FeatureDataset {
        features,
        labels,
        stats: Arc::new(Standardization {
            mean: Array1::zeros(dim),
            std: Array1::ones(dim),
        }),
    }
}

/// 28×28 greyscale images: class `c` brightens a 7×7 block whose position
/// depends on `c`, over uniform background noise.
pub fn digit_like_images(n: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = Vec::with_capacity(n * 784);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = (i % 10) as u8;
        let (br, bc) = (usize::from(c / 4) * 7 + 3, usize::from(c % 4) * 7);
        for r in 0..28 {
            for col in 0..28 {
                let inside = (br..br + 7).contains(&r) && (bc..bc + 7).contains(&col);
                let base: u8 = if inside { 200 } else { 0 };
                pixels.push(base.saturating_add(rng.random_range(0..40)));
            }
        }
        labels.push(c);
    }
    (pixels, labels)
}

pub fn idx_images_bytes(pixels: &[u8], count: usize, rows: usize, cols: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn idx_labels_bytes(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    for v in [IDX_LABELS_MAGIC, labels.len() as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(labels);
    out
}

/// Writes an MNIST-layout fixture into `dir` (train images gzip-compressed,
/// the rest raw).
pub fn write_idx_fixture(dir: &Path, n_train: usize, n_test: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    };
    let (train_px, train_lb) = digit_like_images(n_train, seed);
    let (test_px, test_lb) = digit_like_images(n_test, seed.wrapping_add(1));
    let mut gz = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::fast());
    gz.write_all(&idx_images_bytes(&train_px, n_train, 28, 28))
        .and_then(|_| gz.flush())
        .map_err(|e| Error::io(dir, e))?;
    write(
        "train-images-idx3-ubyte.gz",
        &gz.finish().map_err(|e| Error::io(dir, e))?,
    )?;
    write("train-labels-idx1-ubyte", &idx_labels_bytes(&train_lb))?;
    write("t10k-images-idx3-ubyte", &idx_images_bytes(&test_px, n_test, 28, 28))?;
    write("t10k-labels-idx1-ubyte", &idx_labels_bytes(&test_lb))
}

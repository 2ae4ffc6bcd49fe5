//! Preprocessed feature cache.
//!
//! ```text
//! MULTIBIN-FEAT v1\n
//! dims <rows> <cols>\n
//! rows*cols f64 features | rows f64 labels | cols f64 mean | cols f64 std   (little-endian)
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::{Array1, Array2};

use super::{DatasetId, FeatureDataset, Split, Standardization};
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &str = "MULTIBIN-FEAT v1";
/// Bumped whenever the preprocessing chain changes output.
pub const PIPELINE_VERSION: u32 = 1;

pub fn cache_path(dir: &Path, dataset: DatasetId, k: usize, split: Split) -> PathBuf {
    dir.join(format!("{dataset}-k{k}-{split}-p{PIPELINE_VERSION}.feat"))
}

pub fn write_features(path: &Path, ds: &FeatureDataset) -> Result<()> {
    let (rows, cols) = ds.features.dim();
    let mut buf = Vec::with_capacity(64 + 8 * (rows * cols + rows + 2 * cols));
    writeln!(buf, "{FEATURE_MAGIC}").expect("vec write");
    writeln!(buf, "dims {rows} {cols}").expect("vec write");
    let values = ds
        .features
        .iter()
        .copied()
        .chain(ds.labels.iter().map(|&l| l as f64))
        .chain(ds.stats.mean.iter().copied())
        .chain(ds.stats.std.iter().copied());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<FeatureDataset> {
    let name = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut lines = bytes.splitn(3, |&b| b == b'\n');
    let magic = lines.next().unwrap_or_default();
    if magic != FEATURE_MAGIC.as_bytes() {
        return Err(Error::parse(&name, 0, "missing MULTIBIN-FEAT v1 header"));
    }
    let dims_line = lines
        .next()
        .ok_or_else(|| Error::parse(&name, magic.len() as u64, "missing dims line"))?;
    let dims = std::str::from_utf8(dims_line).unwrap_or_default();
    let parsed: Vec<usize> = dims
        .strip_prefix("dims ")
        .map(|d| d.split_whitespace().filter_map(|t| t.parse().ok()).collect())
        .unwrap_or_default();
    let [rows, cols] = parsed[..] else {
        return Err(Error::parse(
            &name,
            magic.len() as u64 + 1,
            format!("bad dims line '{dims}'"),
        ));
    };
    let header_len = magic.len() + dims_line.len() + 2;
    let payload = &bytes[header_len.min(bytes.len())..];
    let count = rows * cols + rows + 2 * cols;
    if payload.len() != 8 * count {
        return Err(Error::parse(
            &name,
            header_len as u64,
            format!("expected {} payload bytes, found {}", 8 * count, payload.len()),
        ));
    }
    let floats: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let (feat, rest) = floats.split_at(rows * cols);
    let (labels, rest) = rest.split_at(rows);
    let (mean, std) = rest.split_at(cols);
    Ok(FeatureDataset {
        features: Array2::from_shape_vec((rows, cols), feat.to_vec()).expect("sized"),
        labels: labels.iter().map(|&l| l as usize).collect(),
        stats: Arc::new(Standardization {
            mean: Array1::from(mean.to_vec()),
            std: Array1::from(std.to_vec()),
        }),
    })
}

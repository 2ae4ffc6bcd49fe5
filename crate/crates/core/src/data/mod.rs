//! Dataset loading and the preprocessing chain that turns images into
//! unit-norm feature vectors.

mod batches;
mod cache;
mod cifar;
mod idx;
mod preprocess;
mod subset;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use batches::batches;
pub use cache::{cache_path, read_features, write_features, FEATURE_MAGIC, PIPELINE_VERSION};
pub use cifar::{load_cifar10, parse_cifar10, CIFAR_RECORD_LEN};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use preprocess::{
    grayscale, grayscale_pixel, preprocess, FeatureDataset, PreprocessReport, Standardization, STD_FLOOR,
};
pub use subset::{class_histogram, filter_classes, relabel_for_task, BinarySet};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Decoded images with their labels, pixels stored `count × H × W × C`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub split: Split,
}

impl RawDataset {
    pub fn new(
        images: Vec<u8>,
        labels: Vec<u8>,
        height: usize,
        width: usize,
        channels: usize,
        split: Split,
    ) -> Result<Self> {
        let count = labels.len();
        let expected = count * height * width * channels;
        if images.len() != expected {
            return Err(Error::Data(format!(
                "{} labels need {expected} pixel bytes, got {}",
                count,
                images.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|l| **l > 9) {
            return Err(Error::Data(format!("label {bad} outside 0..=9")));
        }
        Ok(Self {
            images,
            labels,
            count,
            height,
            width,
            channels,
            split,
        })
    }

    pub fn image_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let len = self.image_len();
        &self.images[i * len..(i + 1) * len]
    }

    fn filter(&self, mut keep: impl FnMut(u8) -> bool) -> Self {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for i in 0..self.count {
            if keep(self.labels[i]) {
                images.extend_from_slice(self.image(i));
                labels.push(self.labels[i]);
            }
        }
        Self {
            count: labels.len(),
            images,
            labels,
            ..*self
        }
    }

    /// Keeps the first `n` samples of every class, preserving order.
    pub fn take_per_class(&self, n: usize) -> Self {
        let mut seen = [0usize; 10];
        self.filter(|l| {
            seen[l as usize] += 1;
            seen[l as usize] <= n
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetId {
    Mnist,
    Fashion,
    Cifar10,
}

impl DatasetId {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetId::Mnist => "mnist",
            DatasetId::Fashion => "fashion",
            DatasetId::Cifar10 => "cifar10",
        }
    }

    /// Feature count after preprocessing.
    pub fn feature_dim(&self) -> usize {
        match self {
            DatasetId::Mnist | DatasetId::Fashion => 784,
            DatasetId::Cifar10 => 1024,
        }
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mnist" => Ok(DatasetId::Mnist),
            "fashion" | "fashion-mnist" | "fashion_mnist" => Ok(DatasetId::Fashion),
            "cifar10" | "cifar-10" | "cifar" => Ok(DatasetId::Cifar10),
            other => Err(Error::Config(format!("unknown dataset '{other}'"))),
        }
    }
}

fn first_existing(dir: &Path, names: &[String]) -> Result<PathBuf> {
    for name in names {
        let p = dir.join(name);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::Data(format!(
        "none of [{}] found in {}",
        names.join(", "),
        dir.display()
    )))
}

fn idx_pair(dir: &Path, prefix: &str) -> Result<(PathBuf, PathBuf)> {
    let names = |kind: &str, rank: u8| {
        let stem = format!("{prefix}-{kind}-idx{rank}-ubyte");
        vec![
            stem.clone(),
            format!("{stem}.gz"),
            format!("{prefix}-{kind}.idx{rank}-ubyte"),
        ]
    };
    Ok((
        first_existing(dir, &names("images", 3))?,
        first_existing(dir, &names("labels", 1))?,
    ))
}

/// Locates a dataset's native train and test splits under `data_dir`.
///
/// MNIST and Fashion-MNIST are read from `<data_dir>/<mnist|fashion>/` (or
/// `data_dir` itself) using the canonical IDX file names, optionally gzipped.
/// CIFAR-10 is read from `<data_dir>/cifar10/cifar-10-batches-bin/`,
/// `<data_dir>/cifar10/` or `data_dir`.
pub fn load_dataset(id: DatasetId, data_dir: &Path) -> Result<(RawDataset, RawDataset)> {
    if !data_dir.is_dir() {
        return Err(Error::Data(format!(
            "data directory {} does not exist",
            data_dir.display()
        )));
    }
    match id {
        DatasetId::Mnist | DatasetId::Fashion => {
            let nested = data_dir.join(id.as_str());
            let dir = if nested.is_dir() {
                nested
            } else {
                data_dir.to_path_buf()
            };
            let (tr_img, tr_lab) = idx_pair(&dir, "train")?;
            let (te_img, te_lab) = idx_pair(&dir, "t10k")?;
            Ok((
                load_idx(&tr_img, &tr_lab, Split::Train)?,
                load_idx(&te_img, &te_lab, Split::Test)?,
            ))
        }
        DatasetId::Cifar10 => {
            let candidates = [
                data_dir.join("cifar10").join("cifar-10-batches-bin"),
                data_dir.join("cifar10"),
                data_dir.join("cifar-10-batches-bin"),
                data_dir.to_path_buf(),
            ];
            let dir = candidates
                .iter()
                .find(|d| d.join("test_batch.bin").is_file())
                .ok_or_else(|| {
                    Error::Data(format!(
                        "CIFAR-10 binary batches (test_batch.bin) not found under {}",
                        data_dir.display()
                    ))
                })?;
            let train: Vec<PathBuf> = (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect();
            Ok((
                load_cifar10(&train, Split::Train)?,
                load_cifar10(&[dir.join("test_batch.bin")], Split::Test)?,
            ))
        }
    }
}

//! IDX container as used by MNIST and Fashion-MNIST: big-endian `u32` magic,
//! big-endian `u32` dimensions, then raw `u8` payload. Files may be gzipped.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::{RawDataset, Split};
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Reads a file, transparently inflating gzip content.
pub(crate) fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize, name: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::parse(name, offset as u64, "header truncated"))
}

/// Returns `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8], name: &str) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = be_u32(bytes, 0, name)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::parse(
            name,
            0,
            format!("expected image magic 0x{IDX_IMAGES_MAGIC:08x}, found 0x{magic:08x}"),
        ));
    }
    let count = be_u32(bytes, 4, name)? as usize;
    let rows = be_u32(bytes, 8, name)? as usize;
    let cols = be_u32(bytes, 12, name)? as usize;
    let need = count * rows * cols;
    let payload = &bytes[16..];
    if payload.len() != need {
        let offset = 16 + payload.len().min(need);
        return Err(Error::parse(
            name,
            offset as u64,
            format!(
                "header declares {count} images of {rows}x{cols} ({need} bytes), payload has {}",
                payload.len()
            ),
        ));
    }
    Ok((count, rows, cols, payload.to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8], name: &str) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, name)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::parse(
            name,
            0,
            format!("expected label magic 0x{IDX_LABELS_MAGIC:08x}, found 0x{magic:08x}"),
        ));
    }
    let count = be_u32(bytes, 4, name)? as usize;
    let payload = &bytes[8..];
    if payload.len() != count {
        return Err(Error::parse(
            name,
            (8 + payload.len().min(count)) as u64,
            format!("header declares {count} labels, payload has {}", payload.len()),
        ));
    }
    Ok(payload.to_vec())
}

pub fn load_idx(images: &Path, labels: &Path, split: Split) -> Result<RawDataset> {
    let img_name = images.display().to_string();
    let lab_name = labels.display().to_string();
    let (count, rows, cols, pixels) = parse_idx_images(&read_maybe_gz(images)?, &img_name)?;
    let labels = parse_idx_labels(&read_maybe_gz(labels)?, &lab_name)?;
    if labels.len() != count {
        return Err(Error::parse(
            lab_name,
            4,
            format!("{} labels for {count} images in {img_name}", labels.len()),
        ));
    }
    RawDataset::new(pixels, labels, rows, cols, 1, split)
}

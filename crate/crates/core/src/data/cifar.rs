//! CIFAR-10 binary batches: fixed 3073-byte records, one label byte followed
//! by the red, green and blue 32×32 planes in row-major order.

use std::path::Path;

use super::idx::read_maybe_gz;
use super::{RawDataset, Split};
use crate::error::{Error, Result};

const SIDE: usize = 32;
const PLANE: usize = SIDE * SIDE;
pub const CIFAR_RECORD_LEN: usize = 1 + 3 * PLANE;

/// Decodes records into interleaved `H × W × 3` pixels.
pub fn parse_cifar10(bytes: &[u8], name: &str) -> Result<(Vec<u8>, Vec<u8>)> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD_LEN) {
        let whole = bytes.len() / CIFAR_RECORD_LEN;
        return Err(Error::parse(
            name,
            (whole * CIFAR_RECORD_LEN) as u64,
            format!(
                "length {} is not a multiple of {CIFAR_RECORD_LEN}; expected {} or {}",
                bytes.len(),
                whole * CIFAR_RECORD_LEN,
                (whole + 1) * CIFAR_RECORD_LEN
            ),
        ));
    }
    let records = bytes.len() / CIFAR_RECORD_LEN;
    let mut labels = Vec::with_capacity(records);
    let mut pixels = vec![0u8; records * 3 * PLANE];
    for (r, rec) in bytes.chunks_exact(CIFAR_RECORD_LEN).enumerate() {
        if rec[0] > 9 {
            return Err(Error::parse(
                name,
                (r * CIFAR_RECORD_LEN) as u64,
                format!("label byte {} outside 0..=9", rec[0]),
            ));
        }
        labels.push(rec[0]);
        let out = &mut pixels[r * 3 * PLANE..(r + 1) * 3 * PLANE];
        for c in 0..3 {
            let plane = &rec[1 + c * PLANE..1 + (c + 1) * PLANE];
            for (p, &v) in plane.iter().enumerate() {
                out[p * 3 + c] = v;
            }
        }
    }
    Ok((labels, pixels))
}

pub fn load_cifar10(paths: &[impl AsRef<Path>], split: Split) -> Result<RawDataset> {
    let mut labels = Vec::new();
    let mut pixels = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let (l, p) = parse_cifar10(&read_maybe_gz(path)?, &path.display().to_string())?;
        labels.extend(l);
        pixels.extend(p);
    }
    RawDataset::new(pixels, labels, SIDE, SIDE, 3, split)
}

//! Binary model files.
//!
//! ```text
//! MULTIBIN-MODEL v1
//! kind quantum|classical
//! dims <M> <N> <D>
//! relaxed <0|1>            (quantum)   |   dropout <rate>   (classical)
//! payload <count>
//! <count> little-endian f64
//! ```
//!
//! Quantum payload: hidden weights row-major, output weights, bias.
//! Classical payload per layer: weights, bias, running mean, running
//! variance, scale, shift; then head weights and head bias.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::mlp::{BatchNorm, DenseLayer, MlpBaselineModel};
use super::quantum::QuantumShallowModel;
use super::train::{BinaryModel, ModelKind};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &str = "MULTIBIN-MODEL v1";

fn payload(model: &BinaryModel) -> Vec<f64> {
    match model {
        BinaryModel::Quantum(m) => m
            .hidden_weights
            .iter()
            .chain(m.output_weights.iter())
            .copied()
            .chain([m.bias])
            .collect(),
        BinaryModel::Classical(m) => {
            let mut out = Vec::new();
            for l in &m.layers {
                out.extend(l.weights.iter());
                out.extend(l.bias.iter());
                out.extend(l.norm.running_mean.iter());
                out.extend(l.norm.running_var.iter());
                out.extend(l.norm.scale.iter());
                out.extend(l.norm.shift.iter());
            }
            out.extend(m.head_weights.iter());
            out.push(m.head_bias);
            out
        }
    }
}

pub fn encode_model(model: &BinaryModel) -> Vec<u8> {
    let mut buf = Vec::new();
    let values = payload(model);
    writeln!(buf, "{MODEL_MAGIC}").expect("vec write");
    writeln!(buf, "kind {}", model.kind()).expect("vec write");
    match model {
        BinaryModel::Quantum(m) => {
            writeln!(buf, "dims {} {} 1", m.hidden_neurons(), m.input_dim()).expect("vec write");
            writeln!(buf, "relaxed {}", u8::from(m.relaxed_l1)).expect("vec write");
        }
        BinaryModel::Classical(m) => {
            writeln!(buf, "dims {} {} {}", m.width(), m.input_dim(), m.depth()).expect("vec write");
            writeln!(buf, "dropout {}", m.dropout_rate).expect("vec write");
        }
    }
    writeln!(buf, "payload {}", values.len()).expect("vec write");
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn write_model(path: &Path, model: &BinaryModel) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode_model(model)).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
    name: &'a str,
}

impl<'a> Header<'a> {
    fn line(&mut self) -> Result<(u64, &'a str)> {
        let start = self.pos;
        let end = self.bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| start + p)
            .ok_or_else(|| Error::parse(self.name, start as u64, "truncated header"))?;
        self.pos = end + 1;
        let text = std::str::from_utf8(&self.bytes[start..end])
            .map_err(|_| Error::parse(self.name, start as u64, "header is not UTF-8"))?;
        Ok((start as u64, text))
    }

    fn field(&mut self, key: &str) -> Result<(u64, &'a str)> {
        let (at, line) = self.line()?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(|r| (at, r.trim()))
            .ok_or_else(|| Error::parse(self.name, at, format!("expected '{key}' line, found '{line}'")))
    }
}

pub fn decode_model(bytes: &[u8], name: &str) -> Result<BinaryModel> {
    let mut h = Header { bytes, pos: 0, name };
    let (_, magic) = h
        .line()
        .map_err(|_| Error::parse(name, 0, format!("missing '{MODEL_MAGIC}' header")))?;
    if magic != MODEL_MAGIC {
        return Err(Error::parse(name, 0, format!("missing '{MODEL_MAGIC}' header")));
    }
    let (at, kind) = h.field("kind")?;
    let kind: ModelKind = kind.parse().map_err(|e: Error| Error::parse(name, at, e.to_string()))?;
    let (at, dims) = h.field("dims")?;
    let dims: Vec<usize> = dims
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(name, at, format!("bad dims '{dims}'")))?;
    let [m, n, d] = dims[..] else {
        return Err(Error::parse(name, at, "dims needs three values"));
    };
    if m == 0 || n == 0 || d == 0 {
        return Err(Error::parse(name, at, "dims must be positive"));
    }
    let (at, extra) = match kind {
        ModelKind::Quantum => h.field("relaxed")?,
        ModelKind::Classical => h.field("dropout")?,
    };
    let extra_value: f64 = extra
        .parse()
        .map_err(|_| Error::parse(name, at, format!("bad value '{extra}'")))?;
    let (at, count) = h.field("payload")?;
    let count: usize = count
        .parse()
        .map_err(|_| Error::parse(name, at, format!("bad payload count '{count}'")))?;
    let expected = match kind {
        ModelKind::Quantum => m * n + m + 1,
        ModelKind::Classical => m * n + (d - 1) * m * m + d * 5 * m + m + 1,
    };
    if count != expected {
        return Err(Error::parse(
            name,
            at,
            format!("payload count {count} does not match dims (expected {expected})"),
        ));
    }
    let body = &bytes[h.pos..];
    if body.len() != 8 * count {
        return Err(Error::parse(
            name,
            h.pos as u64,
            format!("expected {} payload bytes, found {}", 8 * count, body.len()),
        ));
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut take = |len: usize| -> Vec<f64> { values.by_ref().take(len).collect() };
    let model = match kind {
        ModelKind::Quantum => {
            let hidden = Array2::from_shape_vec((m, n), take(m * n)).expect("sized");
            let output = Array1::from(take(m));
            let bias = take(1)[0];
            BinaryModel::Quantum(QuantumShallowModel::new(hidden, output, bias, extra_value != 0.0)?)
        }
        ModelKind::Classical => {
            let mut layers = Vec::with_capacity(d);
            let mut fan_in = n;
            for _ in 0..d {
                let weights = Array2::from_shape_vec((m, fan_in), take(m * fan_in)).expect("sized");
                let bias = Array1::from(take(m));
                let norm = BatchNorm {
                    running_mean: Array1::from(take(m)),
                    running_var: Array1::from(take(m)),
                    scale: Array1::from(take(m)),
                    shift: Array1::from(take(m)),
                };
                layers.push(DenseLayer { weights, bias, norm });
                fan_in = m;
            }
            let head_weights = Array1::from(take(m));
            let head_bias = take(1)[0];
            let model = MlpBaselineModel {
                layers,
                head_weights,
                head_bias,
                dropout_rate: extra_value,
            };
            model.validate()?;
            BinaryModel::Classical(model)
        }
    };
    Ok(model)
}

pub fn read_model(path: &Path) -> Result<BinaryModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes, &path.display().to_string())
}

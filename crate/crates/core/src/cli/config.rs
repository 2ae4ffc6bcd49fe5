//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Keys are case-insensitive.
//! Overrides use the same keys and are applied after the file.

use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;

/// Recognised keys, in documentation order.
pub const KEYS: [&str; 18] = [
    "dataset", "data_dir", "model", "strategy", "K", "M", "D", "batch", "epochs", "lr", "momentum", "decay", "seed",
    "policy", "workers", "out_dir", "relaxed", "dropout",
];

fn typed<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for key '{key}'")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid value '{value}' for key '{key}' (expected true or false)"
        ))),
    }
}

/// Applies one `key`/`value` pair. Unknown keys are errors.
pub fn apply(config: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    let value = value.trim();
    let t = &mut config.train;
    match key.trim().to_ascii_lowercase().as_str() {
        "dataset" => config.dataset = value.parse()?,
        "data_dir" => config.data_dir = PathBuf::from(value),
        "model" => t.kind = value.parse()?,
        "strategy" => config.strategy = value.parse()?,
        "k" => config.k = typed(key, value)?,
        "m" => t.hidden = typed(key, value)?,
        "d" => t.depth = typed(key, value)?,
        "batch" => t.batch_size = typed(key, value)?,
        "epochs" => t.epochs = typed(key, value)?,
        "lr" => t.sgd.learning_rate = typed(key, value)?,
        "momentum" => t.sgd.momentum = typed(key, value)?,
        "decay" => t.sgd.weight_decay = typed(key, value)?,
        "seed" => t.seed = typed(key, value)?,
        "policy" => config.policy = value.parse()?,
        "workers" => config.workers = typed(key, value)?,
        "out_dir" => config.out_dir = PathBuf::from(value),
        "relaxed" => t.relaxed_l1 = boolean(key, value)?,
        "dropout" => t.dropout = typed(key, value)?,
        _ => {
            return Err(Error::Config(format!(
                "unknown config key '{}' (known keys: {})",
                key.trim(),
                KEYS.join(", ")
            )))
        }
    }
    Ok(())
}

/// Splits `key=value`; used for both file lines and `--set` arguments.
pub fn split_pair(text: &str) -> Result<(&str, &str)> {
    text.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| Error::Config(format!("expected key=value, got '{text}'")))
}

pub fn parse_config_text(text: &str, name: &str, config: &mut ExperimentConfig) -> Result<()> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = split_pair(line).map_err(|e| Error::Config(format!("{name}:{}: {e}", i + 1)))?;
        apply(config, k, v).map_err(|e| Error::Config(format!("{name}:{}: {e}", i + 1)))?;
    }
    Ok(())
}

/// Defaults, then the file (if any), then the overrides.
pub fn load_config(path: Option<&std::path::Path>, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
        parse_config_text(&text, &p.display().to_string(), &mut config)?;
    }
    for o in overrides {
        let (k, v) = split_pair(o)?;
        apply(&mut config, k, v)?;
    }
    config.validate()?;
    Ok(config)
}

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::bce_loss;
use super::mlp::{MlpBaselineModel, DEFAULT_DEPTH, DEFAULT_DROPOUT};
use super::optim::{OptimizerState, ParamSlot, SgdConfig};
use super::quantum::QuantumShallowModel;
use crate::data::{batches, BinarySet};
use crate::error::{Error, Result};
use crate::multiclass::BinaryScorer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Quantum,
    Classical,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Quantum => "quantum",
            ModelKind::Classical => "classical",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "quantum" => Ok(ModelKind::Quantum),
            "classical" | "mlp" => Ok(ModelKind::Classical),
            other => Err(Error::Config(format!(
                "unknown model kind '{other}' (expected quantum or classical)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Hidden neurons (`M`); also the width of every MLP layer.
    pub hidden: usize,
    /// MLP depth (`D`); ignored by the quantum model.
    pub depth: usize,
    pub dropout: f64,
    /// Non-negative but unnormalized output weights for the quantum model.
    pub relaxed_l1: bool,
    pub sgd: SgdConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Quantum,
            batch_size: 64,
            epochs: 20,
            seed: 0,
            hidden: 40,
            depth: DEFAULT_DEPTH,
            dropout: DEFAULT_DROPOUT,
            relaxed_l1: false,
            sgd: SgdConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.hidden == 0 || self.depth == 0 {
            return Err(Error::Config("M and D must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        self.sgd.validate()
    }
}

/// A trained binary classifier of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum BinaryModel {
    Quantum(QuantumShallowModel),
    Classical(MlpBaselineModel),
}

impl BinaryModel {
    pub fn init(rng: &mut ChaCha8Rng, input_dim: usize, config: &TrainConfig) -> Result<Self> {
        Ok(match config.kind {
            ModelKind::Quantum => BinaryModel::Quantum(QuantumShallowModel::init(
                rng,
                config.hidden,
                input_dim,
                config.relaxed_l1,
            )?),
            ModelKind::Classical => BinaryModel::Classical(MlpBaselineModel::init(
                rng,
                config.hidden,
                input_dim,
                config.depth,
                config.dropout,
            )?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            BinaryModel::Quantum(_) => ModelKind::Quantum,
            BinaryModel::Classical(_) => ModelKind::Classical,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            BinaryModel::Quantum(m) => m.input_dim(),
            BinaryModel::Classical(m) => m.input_dim(),
        }
    }

    /// Eval-mode score in `(0, 1)`.
    pub fn score(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        match self {
            BinaryModel::Quantum(m) => m.forward(x),
            BinaryModel::Classical(m) => m.score(x),
        }
    }

    pub fn score_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        match self {
            BinaryModel::Quantum(m) => m.forward_batch(xs),
            BinaryModel::Classical(m) => m.score_batch(xs),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BinaryModel::Quantum(m) => m.validate(),
            BinaryModel::Classical(m) => m.validate(),
        }
    }
}

impl BinaryScorer for BinaryModel {
    fn score(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        BinaryModel::score(self, x)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss over the epoch's batches, weighted by batch size.
    pub train_loss: f64,
    /// Fraction of training samples classified correctly as they were seen.
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
    /// Hidden rows re-randomized by the projection this epoch.
    pub resampled_rows: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: BinaryModel,
    pub history: Vec<EpochRecord>,
}

/// Mean loss and accuracy of a model over a whole set, eval mode.
pub fn evaluate_set(model: &BinaryModel, set: &BinarySet<'_>) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Err(Error::Usage("cannot evaluate an empty set".into()));
    }
    let all: Vec<usize> = (0..set.len()).collect();
    let mut loss = 0.0;
    let mut correct = 0;
    for chunk in all.chunks(1024) {
        let (xs, ys) = set.gather(chunk);
        let scores = model.score_batch(xs.view())?;
        for (&s, &y) in scores.iter().zip(&ys) {
            loss += bce_loss(s, y);
            correct += usize::from((s >= 0.5) == (y >= 0.5));
        }
    }
    let n = set.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

fn check_sides(set: &BinarySet<'_>) -> Result<()> {
    for (label, classes) in [(0.0, &set.task.zero_classes), (1.0, &set.task.one_classes)] {
        if set.count_label(label) == 0 {
            return Err(Error::Usage(format!(
                "task {} has no training samples for label {label} (classes {classes:?})",
                set.task.id
            )));
        }
    }
    Ok(())
}

fn slice_mut(a: &mut ndarray::Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

/// Mini-batch SGD on one binary task.
///
/// Each epoch shuffles the set from `(seed, epoch)`, then per batch takes a
/// gradient, an optimizer step and (quantum kind) a constraint projection.
/// The same seed and config always reproduce the same model.
pub fn train_binary(train: &BinarySet<'_>, val: Option<&BinarySet<'_>>, config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    check_sides(train)?;
    if config.batch_size > train.len() {
        return Err(Error::Config(format!(
            "batch size {} exceeds the {} training samples of task {}",
            config.batch_size,
            train.len(),
            train.task.id
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = BinaryModel::init(&mut rng, train.dim(), config)?;
    let lengths = match &model {
        BinaryModel::Quantum(m) => vec![m.hidden_weights.len(), m.output_weights.len(), 1],
        BinaryModel::Classical(m) => m.group_lengths(),
    };
    let mut opt = OptimizerState::new(config.sgd, &lengths)?;
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut correct = 0;
        let mut resampled = 0;
        for (b, batch) in batches(train.len(), config.batch_size, config.seed, epoch as u64)
            .iter()
            .enumerate()
        {
            let (xs, ys) = train.gather(batch);
            let (loss, hits) = match &mut model {
                BinaryModel::Quantum(m) => {
                    let g = m.gradient(xs.view(), &ys)?;
                    let out = (g.loss, g.correct);
                    if out.0.is_finite() {
                        let grad_hidden = g.hidden_weights.as_slice().expect("standard layout");
                        let grad_out = g.output_weights.as_slice().expect("contiguous");
                        let mut slots = [
                            ParamSlot::new(slice_mut(&mut m.hidden_weights), grad_hidden, true),
                            ParamSlot::new(m.output_weights.as_slice_mut().expect("contiguous"), grad_out, true),
                            ParamSlot::new(std::slice::from_mut(&mut m.bias), std::slice::from_ref(&g.bias), false),
                        ];
                        opt.step(&mut slots)?;
                        resampled += m.project_constraints(&mut rng);
                    }
                    out
                }
                BinaryModel::Classical(m) => {
                    let (g, stats) = m.gradient(xs.view(), &ys, Some(&mut rng))?;
                    if g.loss.is_finite() {
                        m.update_running(&stats);
                        opt.step(&mut m.slots(&g))?;
                    }
                    (g.loss, g.correct)
                }
            };
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss in task {} at epoch {epoch}, batch {b}",
                    train.task.id
                )));
            }
            loss_sum += loss * batch.len() as f64;
            correct += hits;
        }
        let (val_loss, val_accuracy) = match val {
            Some(v) => {
                let (l, a) = evaluate_set(&model, v)?;
                (Some(l), Some(a))
            }
            None => (None, None),
        };
        let n = train.len() as f64;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            val_loss,
            val_accuracy,
            resampled_rows: resampled,
        });
    }
    model.validate()?;
    Ok(TrainOutput { model, history })
}

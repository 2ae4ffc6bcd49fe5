//! Unconstrained classical baseline: `D` dense layers of `M` neurons, each
//! followed by batch normalization, ReLU and dropout, then a sigmoid head.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};
use crate::model::loss::{bce_loss, sigmoid};
use crate::model::optim::ParamSlot;

pub const DEFAULT_DEPTH: usize = 2;
pub const DEFAULT_DROPOUT: f64 = 0.2;
/// Weight of the newest batch in the running normalization statistics.
pub const BN_MOMENTUM: f64 = 0.1;
/// Floor applied to every normalization variance.
pub const VARIANCE_FLOOR: f64 = 1e-5;

/// Per-feature normalization state of one hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub scale: Array1<f64>,
    pub shift: Array1<f64>,
}

impl BatchNorm {
    pub fn identity(width: usize) -> Self {
        Self {
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
            scale: Array1::ones(width),
            shift: Array1::zeros(width),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out × in`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub norm: BatchNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpBaselineModel {
    pub layers: Vec<DenseLayer>,
    pub head_weights: Array1<f64>,
    pub head_bias: f64,
    pub dropout_rate: f64,
}

pub enum Mode<'a> {
    /// Batch statistics, sampled dropout masks, running statistics updated.
    Train(&'a mut dyn RngCore),
    /// Running statistics, dropout disabled.
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub scale: Array1<f64>,
    pub shift: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient {
    pub layers: Vec<LayerGradient>,
    pub head_weights: Array1<f64>,
    pub head_bias: f64,
    pub loss: f64,
    /// Batch samples whose thresholded score matches the label.
    pub correct: usize,
}

/// Mean and (floored) variance observed per layer on one training batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStatistics {
    pub layers: Vec<(Array1<f64>, Array1<f64>)>,
}

struct LayerCache {
    input: Array2<f64>,
    normalized: Array2<f64>,
    pre_relu: Array2<f64>,
    mask: Option<Array2<f64>>,
    inv_std: Array1<f64>,
    floored: Vec<bool>,
    mean: Array1<f64>,
    var: Array1<f64>,
}

impl MlpBaselineModel {
    /// He-scaled normal weights, zero biases, identity normalization.
    pub fn init<R: Rng + ?Sized>(
        rng: &mut R,
        width: usize,
        input_dim: usize,
        depth: usize,
        dropout_rate: f64,
    ) -> Result<Self> {
        if width == 0 || input_dim == 0 || depth == 0 {
            return Err(Error::Usage(format!(
                "baseline needs width, input and depth >= 1, got M={width} N={input_dim} D={depth}"
            )));
        }
        check_dropout(dropout_rate)?;
        let mut layers = Vec::with_capacity(depth);
        let mut fan_in = input_dim;
        for _ in 0..depth {
            let std = (2.0 / fan_in as f64).sqrt();
            let weights = Array2::from_shape_simple_fn((width, fan_in), || std * rng.sample::<f64, _>(StandardNormal));
            layers.push(DenseLayer {
                weights,
                bias: Array1::zeros(width),
                norm: BatchNorm::identity(width),
            });
            fan_in = width;
        }
        let std = (2.0 / width as f64).sqrt();
        let head_weights = Array1::from_shape_simple_fn(width, || std * rng.sample::<f64, _>(StandardNormal));
        Ok(Self {
            layers,
            head_weights,
            head_bias: 0.0,
            dropout_rate,
        })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn width(&self) -> usize {
        self.head_weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    /// Structural checks: uniform width, matching shapes, valid dropout and
    /// strictly positive running variances.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("baseline has no hidden layers".into()));
        }
        check_dropout(self.dropout_rate)?;
        let width = self.width();
        let mut fan_in = self.input_dim();
        for (i, layer) in self.layers.iter().enumerate() {
            let (out, inp) = layer.weights.dim();
            if out != width {
                return Err(Error::Config(format!("layer {i} has {out} neurons, expected {width}")));
            }
            check_len("layer input", fan_in, inp)?;
            check_len("layer bias", width, layer.bias.len())?;
            for v in [
                &layer.norm.running_mean,
                &layer.norm.running_var,
                &layer.norm.scale,
                &layer.norm.shift,
            ] {
                check_len("normalization statistics", width, v.len())?;
            }
            if layer.norm.running_var.iter().any(|v| v.is_nan() || *v <= 0.0) {
                return Err(Error::Config(format!("layer {i} has a non-positive running variance")));
            }
            fan_in = width;
        }
        Ok(())
    }

    /// Score of a single sample. Train mode treats it as a batch of one.
    pub fn forward(&mut self, x: ArrayView1<'_, f64>, mode: Mode<'_>) -> Result<f64> {
        let xs = x.insert_axis(Axis(0));
        Ok(self.forward_batch(xs, mode)?[0])
    }

    pub fn forward_batch(&mut self, xs: ArrayView2<'_, f64>, mode: Mode<'_>) -> Result<Array1<f64>> {
        match mode {
            Mode::Eval => self.score_batch(xs),
            Mode::Train(rng) => {
                let (pre, caches, _) = self.train_pass(xs, Some(rng))?;
                self.update_running(&BatchStatistics {
                    layers: caches.into_iter().map(|c| (c.mean, c.var)).collect(),
                });
                Ok(pre.mapv(sigmoid))
            }
        }
    }

    /// Evaluation-mode score of one sample; never mutates the model.
    pub fn score(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        Ok(self.score_batch(x.insert_axis(Axis(0)))?[0])
    }

    pub fn score_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        check_len("baseline input", self.input_dim(), xs.ncols())?;
        let mut h = xs.to_owned();
        for layer in &self.layers {
            let mut u = h.dot(&layer.weights.t()) + &layer.bias;
            let n = &layer.norm;
            for mut row in u.rows_mut() {
                for j in 0..row.len() {
                    let inv_std = 1.0 / n.running_var[j].max(VARIANCE_FLOOR).sqrt();
                    let v = n.scale[j] * (row[j] - n.running_mean[j]) * inv_std + n.shift[j];
                    row[j] = v.max(0.0);
                }
            }
            h = u;
        }
        Ok((h.dot(&self.head_weights) + self.head_bias).mapv(sigmoid))
    }

    fn train_pass(
        &self,
        xs: ArrayView2<'_, f64>,
        mut rng: Option<&mut dyn RngCore>,
    ) -> Result<(Array1<f64>, Vec<LayerCache>, Array2<f64>)> {
        check_len("baseline input", self.input_dim(), xs.ncols())?;
        let batch = xs.nrows();
        if batch == 0 {
            return Err(Error::Usage("forward pass of an empty batch".into()));
        }
        let keep = 1.0 - self.dropout_rate;
        let mut h = xs.to_owned();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let u = h.dot(&layer.weights.t()) + &layer.bias;
            let mean = u.mean_axis(Axis(0)).expect("non-empty batch");
            let centered = &u - &mean;
            let raw_var = (&centered * &centered).mean_axis(Axis(0)).expect("non-empty batch");
            let floored: Vec<bool> = raw_var.iter().map(|v| *v < VARIANCE_FLOOR).collect();
            let var = raw_var.mapv(|v| v.max(VARIANCE_FLOOR));
            let inv_std = var.mapv(|v| 1.0 / v.sqrt());
            let normalized = &centered * &inv_std;
            let pre_relu = &normalized * &layer.norm.scale + &layer.norm.shift;
            let mut out = pre_relu.mapv(|v| v.max(0.0));
            let mask = match (&mut rng, self.dropout_rate > 0.0) {
                (Some(r), true) => {
                    let m = Array2::from_shape_simple_fn(out.dim(), || {
                        if r.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    out *= &m;
                    Some(m)
                }
                _ => None,
            };
            caches.push(LayerCache {
                input: h,
                normalized,
                pre_relu,
                mask,
                inv_std,
                floored,
                mean,
                var,
            });
            h = out;
        }
        let pre = h.dot(&self.head_weights) + self.head_bias;
        Ok((pre, caches, h))
    }

    /// Gradient of the mean batch BCE in train mode (batch statistics,
    /// dropout masks drawn from `rng` when given). Returns the statistics the
    /// caller should fold into the running averages.
    pub fn gradient(
        &self,
        xs: ArrayView2<'_, f64>,
        labels: &[f64],
        rng: Option<&mut dyn RngCore>,
    ) -> Result<(MlpGradient, BatchStatistics)> {
        let batch = xs.nrows();
        if batch == 0 {
            return Err(Error::Usage("gradient of an empty batch".into()));
        }
        check_len("batch labels", batch, labels.len())?;
        let (pre, caches, head_input) = self.train_pass(xs, rng)?;

        let inv = 1.0 / batch as f64;
        let mut loss = 0.0;
        let mut correct = 0;
        let residual: Array1<f64> = pre
            .iter()
            .zip(labels)
            .map(|(&p, &y)| {
                let s = sigmoid(p);
                loss += bce_loss(s, y);
                correct += usize::from((s >= 0.5) == (y >= 0.5));
                (s - y) * inv
            })
            .collect();

        let head_weights = head_input.t().dot(&residual);
        let head_bias = residual.sum();
        let mut upstream = residual
            .view()
            .insert_axis(Axis(1))
            .dot(&self.head_weights.view().insert_axis(Axis(0)));

        let mut layer_grads = Vec::with_capacity(self.layers.len());
        for (layer, cache) in self.layers.iter().zip(caches.iter()).rev() {
            if let Some(mask) = &cache.mask {
                upstream *= mask;
            }
            upstream.zip_mut_with(&cache.pre_relu, |g, &v| {
                if v <= 0.0 {
                    *g = 0.0
                }
            });
            let d_shift = upstream.sum_axis(Axis(0));
            let d_scale = (&upstream * &cache.normalized).sum_axis(Axis(0));
            let d_norm = &upstream * &layer.norm.scale;
            let mean_d = d_norm.mean_axis(Axis(0)).expect("non-empty batch");
            let mean_dx = (&d_norm * &cache.normalized)
                .mean_axis(Axis(0))
                .expect("non-empty batch");
            // batch-norm backward; floored variances are constants
            let mut d_pre = d_norm;
            for (mut row, xrow) in d_pre.rows_mut().into_iter().zip(cache.normalized.rows()) {
                for j in 0..row.len() {
                    let mut g = row[j] - mean_d[j];
                    if !cache.floored[j] {
                        g -= xrow[j] * mean_dx[j];
                    }
                    row[j] = g * cache.inv_std[j];
                }
            }
            let d_weights = d_pre.t().dot(&cache.input);
            let d_bias = d_pre.sum_axis(Axis(0));
            upstream = d_pre.dot(&layer.weights);
            layer_grads.push(LayerGradient {
                weights: d_weights,
                bias: d_bias,
                scale: d_scale,
                shift: d_shift,
            });
        }
        layer_grads.reverse();

        let stats = BatchStatistics {
            layers: caches.into_iter().map(|c| (c.mean, c.var)).collect(),
        };
        Ok((
            MlpGradient {
                layers: layer_grads,
                head_weights,
                head_bias,
                loss: loss * inv,
                correct,
            },
            stats,
        ))
    }

    pub fn update_running(&mut self, stats: &BatchStatistics) {
        for (layer, (mean, var)) in self.layers.iter_mut().zip(&stats.layers) {
            let n = &mut layer.norm;
            n.running_mean
                .zip_mut_with(mean, |r, &m| *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m);
            n.running_var.zip_mut_with(var, |r, &v| {
                *r = ((1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * v).max(VARIANCE_FLOOR)
            });
        }
    }

    /// Lengths of the trainable parameter groups, in [`slots`](Self::slots) order.
    pub fn group_lengths(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(4 * self.layers.len() + 2);
        for layer in &self.layers {
            out.extend([
                layer.weights.len(),
                layer.bias.len(),
                layer.norm.scale.len(),
                layer.norm.shift.len(),
            ]);
        }
        out.extend([self.head_weights.len(), 1]);
        out
    }

    /// Parameter groups paired with their gradients. Weight matrices are
    /// decayed; biases and normalization affine terms are not.
    pub fn slots<'a>(&'a mut self, grad: &'a MlpGradient) -> Vec<ParamSlot<'a>> {
        let mut out = Vec::with_capacity(4 * self.layers.len() + 2);
        for (layer, g) in self.layers.iter_mut().zip(&grad.layers) {
            let DenseLayer { weights, bias, norm } = layer;
            out.push(ParamSlot::new(slice_mut(weights), slice(&g.weights), true));
            out.push(ParamSlot::new(
                bias.as_slice_mut().expect("contiguous"),
                slice1(&g.bias),
                false,
            ));
            out.push(ParamSlot::new(
                norm.scale.as_slice_mut().expect("contiguous"),
                slice1(&g.scale),
                false,
            ));
            out.push(ParamSlot::new(
                norm.shift.as_slice_mut().expect("contiguous"),
                slice1(&g.shift),
                false,
            ));
        }
        out.push(ParamSlot::new(
            self.head_weights.as_slice_mut().expect("contiguous"),
            slice1(&grad.head_weights),
            true,
        ));
        out.push(ParamSlot::new(
            std::slice::from_mut(&mut self.head_bias),
            std::slice::from_ref(&grad.head_bias),
            false,
        ));
        out
    }
}

fn slice_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("contiguous")
}

fn slice(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("contiguous")
}

fn slice1(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("contiguous")
}

fn check_dropout(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::Config(format!("dropout rate must lie in [0, 1), got {rate}")))
    }
}

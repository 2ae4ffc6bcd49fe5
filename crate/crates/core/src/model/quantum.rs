//! Constrained shallow network: square-modulus hidden units with unit-norm
//! weight rows, mixed by non-negative output weights, then bias and sigmoid.
//!
//! `score(x) = σ(Σ_m p_m (w_m · x)² + b)`
//!
//! In strict mode the output weights `p` form a probability vector. In the
//! relaxed mode they are only required to be non-negative, which is the same
//! as scaling the normalized mixture by its L1 constant before the sigmoid.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};
use crate::model::loss::{bce_loss, sigmoid};

/// Rows whose norm falls below this are treated as degenerate and resampled.
pub const DEGENERATE_ROW_NORM: f64 = 1e-12;
/// Tolerance used when validating the model constraints.
pub const CONSTRAINT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumShallowModel {
    /// `M × N`, one unit-norm row per hidden neuron.
    pub hidden_weights: Array2<f64>,
    /// Length `M`, non-negative.
    pub output_weights: Array1<f64>,
    pub bias: f64,
    pub relaxed_l1: bool,
}

/// Gradient of the mean batch loss with respect to each parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumGradient {
    pub hidden_weights: Array2<f64>,
    pub output_weights: Array1<f64>,
    pub bias: f64,
    /// Mean binary cross-entropy of the batch at the current parameters.
    pub loss: f64,
    /// Batch samples whose thresholded score matches the label.
    pub correct: usize,
}

impl QuantumShallowModel {
    /// Builds a model from explicit parameters, validating every constraint.
    pub fn new(hidden_weights: Array2<f64>, output_weights: Array1<f64>, bias: f64, relaxed_l1: bool) -> Result<Self> {
        let model = Self::from_raw(hidden_weights, output_weights, bias, relaxed_l1)?;
        model.validate()?;
        Ok(model)
    }

    /// Builds a model without checking the norm constraints, only shapes.
    /// Use [`project_constraints`](Self::project_constraints) to make it feasible.
    pub fn from_raw(
        hidden_weights: Array2<f64>,
        output_weights: Array1<f64>,
        bias: f64,
        relaxed_l1: bool,
    ) -> Result<Self> {
        let (m, n) = hidden_weights.dim();
        if m == 0 || n == 0 {
            return Err(Error::Usage(format!("hidden layer must be at least 1x1, got {m}x{n}")));
        }
        check_len("output weights", m, output_weights.len())?;
        Ok(Self {
            hidden_weights,
            output_weights,
            bias,
            relaxed_l1,
        })
    }

    /// Hidden rows drawn i.i.d. standard normal then normalized, output
    /// weights uniform `1/M`, bias zero.
    pub fn init<R: Rng + ?Sized>(rng: &mut R, m: usize, n: usize, relaxed_l1: bool) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Usage(format!("hidden layer must be at least 1x1, got {m}x{n}")));
        }
        let mut hidden = Array2::<f64>::zeros((m, n));
        for mut row in hidden.rows_mut() {
            sample_unit_row(rng, row.as_slice_mut().expect("standard layout"));
        }
        Ok(Self {
            hidden_weights: hidden,
            output_weights: Array1::from_elem(m, 1.0 / m as f64),
            bias: 0.0,
            relaxed_l1,
        })
    }

    pub fn hidden_neurons(&self) -> usize {
        self.hidden_weights.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.hidden_weights.ncols()
    }

    /// Sum of the output weights. Equals 1 in strict mode.
    pub fn l1_constant(&self) -> f64 {
        self.output_weights.sum()
    }

    /// Squared overlaps `(w_m · x)²` for every hidden neuron.
    pub fn hidden_activations(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_len("quantum forward input", self.input_dim(), x.len())?;
        Ok(self.hidden_weights.dot(&x).mapv(|z| z * z))
    }

    /// Value fed to the sigmoid.
    pub fn pre_activation(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        let a = self.hidden_activations(x)?;
        Ok(self.output_weights.dot(&a) + self.bias)
    }

    /// Classification score in `(0, 1)`.
    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        self.pre_activation(x).map(sigmoid)
    }

    /// Scores for every row of `xs`.
    pub fn forward_batch(&self, xs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        check_len("quantum forward input", self.input_dim(), xs.ncols())?;
        let z = xs.dot(&self.hidden_weights.t());
        let pre = (&z * &z).dot(&self.output_weights) + self.bias;
        Ok(pre.mapv(sigmoid))
    }

    /// Exact gradient of the mean binary cross-entropy over the batch with
    /// respect to the raw parameters. Constraints are not applied here.
    pub fn gradient(&self, xs: ArrayView2<'_, f64>, labels: &[f64]) -> Result<QuantumGradient> {
        let batch = xs.nrows();
        if batch == 0 {
            return Err(Error::Usage("gradient of an empty batch".into()));
        }
        check_len("batch labels", batch, labels.len())?;
        check_len("quantum gradient input", self.input_dim(), xs.ncols())?;

        let z = xs.dot(&self.hidden_weights.t());
        let act = &z * &z;
        let pre = act.dot(&self.output_weights) + self.bias;
        let inv = 1.0 / batch as f64;
        let mut loss = 0.0;
        let mut correct = 0;
        // dL/d(pre) for sigmoid + BCE, averaged over the batch
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

        let grad_out = act.t().dot(&residual);
        let grad_bias = residual.sum();
        // dL/dw_m = Σ_i r_i · 2 p_m z_im · x_i
        let mut coeff = z;
        for (mut row, &r) in coeff.axis_iter_mut(Axis(0)).zip(residual.iter()) {
            row.zip_mut_with(&self.output_weights, |c, &p| *c *= 2.0 * p * r);
        }
        let grad_hidden = coeff.t().dot(&xs);

        Ok(QuantumGradient {
            hidden_weights: grad_hidden,
            output_weights: grad_out,
            bias: grad_bias,
            loss: loss * inv,
            correct,
        })
    }

    /// Restores feasibility: unit-norm hidden rows, non-negative output
    /// weights, and (strict mode) output weights summing to one.
    ///
    /// A hidden row whose norm is below [`DEGENERATE_ROW_NORM`] is resampled
    /// from the init distribution. If every output weight clamps to zero they
    /// are reset to uniform `1/M`. Returns the number of resampled rows.
    pub fn project_constraints<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let mut resampled = 0;
        for mut row in self.hidden_weights.rows_mut() {
            let row = row.as_slice_mut().expect("standard layout");
            let norm = l2_norm(row);
            if norm < DEGENERATE_ROW_NORM || !norm.is_finite() {
                sample_unit_row(rng, row);
                resampled += 1;
            } else {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }

        self.output_weights.mapv_inplace(|p| if p > 0.0 { p } else { 0.0 });
        let total = self.output_weights.sum();
        let m = self.output_weights.len() as f64;
        if total <= 0.0 {
            self.output_weights.fill(1.0 / m);
        } else if !self.relaxed_l1 {
            self.output_weights.mapv_inplace(|p| p / total);
        }
        resampled
    }

    /// Checks every constraint to [`CONSTRAINT_TOL`].
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.hidden_weights.rows().into_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            if (norm - 1.0).abs() > CONSTRAINT_TOL {
                return Err(Error::Config(format!("hidden row {i} has norm {norm}, expected 1")));
            }
        }
        if let Some((i, p)) = self
            .output_weights
            .iter()
            .enumerate()
            .find(|(_, p)| p.is_nan() || **p < 0.0)
        {
            return Err(Error::Config(format!("output weight {i} is negative ({p})")));
        }
        if !self.relaxed_l1 {
            let total = self.l1_constant();
            if (total - 1.0).abs() > CONSTRAINT_TOL {
                return Err(Error::Config(format!("output weights sum to {total}, expected 1")));
            }
        }
        if !self.bias.is_finite() {
            return Err(Error::Config("bias is not finite".into()));
        }
        Ok(())
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sample_unit_row<R: Rng + ?Sized>(rng: &mut R, row: &mut [f64]) {
    loop {
        row.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let norm = l2_norm(row);
        if norm >= DEGENERATE_ROW_NORM {
            row.iter_mut().for_each(|v| *v /= norm);
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn logistic(t: f64) -> f64 {
        1.0 / (1.0 + (-t).exp())
    }

    #[test]
    fn unit_self_overlap_scores_logistic_of_one() {
        let x = array![0.6, 0.8];
        let model = QuantumShallowModel::new(x.clone().insert_axis(Axis(0)), array![1.0], 0.0, false).unwrap();
        assert_abs_diff_eq!(model.forward(x.view()).unwrap(), 0.731_058_578_6, epsilon = 1e-9);
    }

    #[test]
    fn orthogonal_input_scores_one_half() {
        let model = QuantumShallowModel::new(array![[0.0, 1.0]], array![1.0], 0.0, false).unwrap();
        assert_eq!(model.forward(array![1.0, 0.0].view()).unwrap(), 0.5);
    }

    #[test]
    fn two_neuron_mixture() {
        let model = QuantumShallowModel::new(array![[1.0, 0.0], [0.0, 1.0]], array![0.25, 0.75], -0.5, false).unwrap();
        // 0.25 * 0.36 + 0.75 * 0.64 - 0.5 = 0.07
        let s = model.forward(array![0.6, 0.8].view()).unwrap();
        assert_abs_diff_eq!(s, logistic(0.07), epsilon = 1e-12);
        assert_abs_diff_eq!(s, 0.517_492_857_4, epsilon = 1e-9);
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let model = QuantumShallowModel::new(array![[1.0, 0.0]], array![1.0], 0.0, false).unwrap();
        let err = model.forward(array![1.0, 0.0, 0.0].view()).unwrap_err();
        assert!(err.to_string().contains("expected 2, got 3"), "{err}");
    }

    #[test]
    fn projection_scales_rows_and_clamps_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = QuantumShallowModel::from_raw(
            array![[3.0, 4.0], [1.0, 0.0], [0.0, 2.0]],
            array![-1.0, 2.0, 2.0],
            0.1,
            false,
        )
        .unwrap();
        assert_eq!(model.project_constraints(&mut rng), 0);
        assert_abs_diff_eq!(model.hidden_weights[[0, 0]], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(model.hidden_weights[[0, 1]], 0.8, epsilon = 1e-15);
        assert_eq!(model.output_weights, array![0.0, 0.5, 0.5]);
        assert_eq!(model.bias, 0.1);
        model.validate().unwrap();
    }

    #[test]
    fn relaxed_projection_keeps_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = QuantumShallowModel::from_raw(array![[2.0]], array![3.0], 0.0, true).unwrap();
        model.project_constraints(&mut rng);
        assert_eq!(model.output_weights, array![3.0]);
        assert_eq!(model.hidden_weights, array![[1.0]]);
    }

    #[test]
    fn degenerate_row_is_resampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut model =
            QuantumShallowModel::from_raw(array![[0.0, 0.0, 0.0], [1.0, 1.0, 0.0]], array![0.5, 0.5], 0.0, false)
                .unwrap();
        assert_eq!(model.project_constraints(&mut rng), 1);
        model.validate().unwrap();
    }

    #[test]
    fn all_zero_output_weights_reset_to_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = QuantumShallowModel::from_raw(
            array![[1.0], [1.0], [1.0], [1.0]],
            array![-1.0, 0.0, -3.0, 0.0],
            0.0,
            false,
        )
        .unwrap();
        model.project_constraints(&mut rng);
        assert_eq!(model.output_weights, Array1::from_elem(4, 0.25));
    }

    #[test]
    fn scalar_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = QuantumShallowModel::init(&mut rng, 1, 1, false).unwrap();
        assert_eq!(model.hidden_weights[[0, 0]].abs(), 1.0);
        assert_eq!(model.output_weights, array![1.0]);
        assert_eq!(model.bias, 0.0);
    }

    #[test]
    fn init_is_seeded_and_feasible() {
        let a = QuantumShallowModel::init(&mut ChaCha8Rng::seed_from_u64(5), 7, 13, false).unwrap();
        let b = QuantumShallowModel::init(&mut ChaCha8Rng::seed_from_u64(5), 7, 13, false).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
    }

    #[test]
    fn new_rejects_infeasible() {
        assert!(QuantumShallowModel::new(array![[1.0, 1.0]], array![1.0], 0.0, false).is_err());
        assert!(QuantumShallowModel::new(array![[1.0]], array![0.5], 0.0, false).is_err());
        assert!(QuantumShallowModel::new(array![[1.0]], array![0.5], 0.0, true).is_ok());
        assert!(QuantumShallowModel::new(array![[1.0], [1.0]], array![1.2, -0.2], 0.0, true).is_err());
    }

    #[test]
    fn gradient_of_empty_batch_is_usage_error() {
        let model = QuantumShallowModel::new(array![[1.0]], array![1.0], 0.0, false).unwrap();
        let xs = Array2::<f64>::zeros((0, 1));
        assert!(matches!(model.gradient(xs.view(), &[]), Err(Error::Usage(_))));
    }

    #[test]
    fn duplicated_sample_gives_single_sample_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = QuantumShallowModel::init(&mut rng, 3, 4, true).unwrap();
        let x = array![[0.5, -0.5, 0.5, 0.5]];
        let xx = array![[0.5, -0.5, 0.5, 0.5], [0.5, -0.5, 0.5, 0.5]];
        let one = model.gradient(x.view(), &[1.0]).unwrap();
        let two = model.gradient(xx.view(), &[1.0, 1.0]).unwrap();
        for (a, b) in one.hidden_weights.iter().zip(two.hidden_weights.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        for (a, b) in one.output_weights.iter().zip(two.output_weights.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(one.bias, two.bias, epsilon = 1e-15);
    }

    #[test]
    fn gradient_vanishes_at_perfect_fit() {
        // A huge bias saturates the sigmoid towards label 1.
        let model = QuantumShallowModel::new(array![[1.0, 0.0]], array![1.0], 60.0, false).unwrap();
        let xs = array![[1.0, 0.0], [0.0, 1.0]];
        let g = model.gradient(xs.view(), &[1.0, 1.0]).unwrap();
        let norm = g
            .hidden_weights
            .iter()
            .chain(g.output_weights.iter())
            .map(|v| v * v)
            .sum::<f64>()
            + g.bias * g.bias;
        assert!(norm.sqrt() < 1e-20, "gradient norm {}", norm.sqrt());
    }
}

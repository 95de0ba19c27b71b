//! Matrix scaling `softmax(W v + b)` with off-diagonal and intercept
//! regularization (ODIR). Not accuracy preserving.

use super::output::CalibratorOutput;
use super::temperature::check_fit_inputs;
use crate::error::{Error, Result};
use crate::nn::{adam_step, softmax_in_place, AdamConfig, AdamState, DenseMatrix, LOG_CLAMP};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixScalingConfig {
    /// Weight of the off-diagonal penalty `Σ_{j≠k} W_jk² / (K(K−1))`.
    pub odir_lambda: f64,
    /// Weight of the intercept penalty `Σ_j b_j² / K`.
    pub odir_mu: f64,
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Consecutive loss increases that count as divergence.
    pub divergence_window: usize,
}

impl Default for MatrixScalingConfig {
    fn default() -> Self {
        Self {
            odir_lambda: 1e-2,
            odir_mu: 1e-2,
            learning_rate: 0.01,
            max_iterations: 400,
            divergence_window: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixScaling {
    /// `K×K`, applied as `W · v`.
    pub weights: DenseMatrix,
    /// Stored as a `1×K` row.
    pub bias: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixScalingFit {
    pub model: MatrixScaling,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
}

impl MatrixScaling {
    pub fn identity(k: usize) -> Self {
        Self {
            weights: DenseMatrix::identity(k),
            bias: DenseMatrix::zeros(1, k),
        }
    }

    pub fn transform(&self, logits: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = logits.matmul_t(&self.weights)?;
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(self.bias.as_slice()) {
                *o += b;
            }
        }
        Ok(out)
    }

    pub fn apply(&self, logits: &DenseMatrix) -> Result<CalibratorOutput> {
        CalibratorOutput::from_calibrated(self.transform(logits)?, vec![1.0; logits.rows()])
    }
}

/// Penalized mean NLL and its gradients with respect to `W` and `b`.
pub fn matrix_scaling_objective(
    model: &MatrixScaling,
    logits: &DenseMatrix,
    labels: &[usize],
    config: &MatrixScalingConfig,
) -> Result<(f64, MatrixScaling)> {
    let k = logits.cols();
    let n = logits.rows() as f64;
    let mut scaled = model.transform(logits)?;
    let mut nll = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let z = scaled.row_mut(r);
        softmax_in_place(z);
        nll -= z[y].max(LOG_CLAMP).ln();
        // scaled now holds d(mean NLL)/d(W v + b)
        z[y] -= 1.0;
        z.iter_mut().for_each(|g| *g /= n);
    }
    let mut d_w = scaled.t_matmul(logits)?;
    let mut d_b = DenseMatrix::zeros(1, k);
    for r in 0..scaled.rows() {
        for (db, g) in d_b.as_mut_slice().iter_mut().zip(scaled.row(r)) {
            *db += g;
        }
    }

    let off_scale = if k > 1 { config.odir_lambda / (k * (k - 1)) as f64 } else { 0.0 };
    let bias_scale = config.odir_mu / k as f64;
    let mut penalty = 0.0;
    for j in 0..k {
        for c in 0..k {
            if j != c {
                let w = model.weights[(j, c)];
                penalty += off_scale * w * w;
                d_w[(j, c)] += 2.0 * off_scale * w;
            }
        }
        let b = model.bias.as_slice()[j];
        penalty += bias_scale * b * b;
        d_b.as_mut_slice()[j] += 2.0 * bias_scale * b;
    }
    Ok((nll / n + penalty, MatrixScaling { weights: d_w, bias: d_b }))
}

/// Full-batch fit from `W = I, b = 0` with Adam steps.
///
/// Returns [`Error::NonConvergence`] if the loss becomes non-finite or rises
/// for `divergence_window` consecutive iterations.
pub fn fit_matrix_scaling(
    logits: &DenseMatrix,
    labels: &[usize],
    config: &MatrixScalingConfig,
) -> Result<MatrixScalingFit> {
    check_fit_inputs(logits, labels)?;
    let mut model = MatrixScaling::identity(logits.cols());
    let mut adam = AdamState::new(&[&model.weights, &model.bias]);
    let adam_cfg = AdamConfig::with_learning_rate(config.learning_rate);

    let (initial_loss, mut grads) = matrix_scaling_objective(&model, logits, labels, config)?;
    let mut best = (initial_loss, model.clone());
    let mut previous = initial_loss;
    let mut rising = 0;
    let mut iterations = 0;
    for it in 1..=config.max_iterations {
        adam_step(
            &mut [&mut model.weights, &mut model.bias],
            &[&grads.weights, &grads.bias],
            &mut adam,
            &adam_cfg,
        )?;
        let (loss, g) = matrix_scaling_objective(&model, logits, labels, config)?;
        iterations = it;
        if !loss.is_finite() {
            return Err(Error::NonConvergence(format!("matrix scaling loss is {loss} at iteration {it}")));
        }
        rising = if loss > previous { rising + 1 } else { 0 };
        if rising >= config.divergence_window {
            return Err(Error::NonConvergence(format!(
                "matrix scaling loss rose for {rising} consecutive iterations"
            )));
        }
        if loss < best.0 {
            best = (loss, model.clone());
        }
        previous = loss;
        grads = g;
    }
    Ok(MatrixScalingFit {
        model: best.1,
        initial_loss,
        final_loss: best.0,
        iterations,
    })
}

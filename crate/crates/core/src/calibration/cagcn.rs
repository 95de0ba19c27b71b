//! CaGCN: a two-layer GCN over the classifier's logits that predicts one
//! positive temperature per node.

use super::output::CalibratorOutput;
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::nn::{
    adam_step, argmax, forward_cached, gcn_backward, softmax_in_place, AdamConfig, AdamState, DenseMatrix, SparseRows,
    DropoutMasks, ForwardCache, GcnParams, LOG_CLAMP,
};
use crate::seed::{self, tag};

#[derive(Debug, Clone, PartialEq)]
pub struct CaGcnConfig {
    pub hidden: usize,
    /// Weight of the calibration regularizer.
    pub lambda: f64,
    pub weight_decay: f64,
    pub learning_rate: f64,
    /// Applied to the input logits and hidden activations while fitting.
    pub dropout: f64,
    pub max_epochs: usize,
    /// Epochs without a lower dropout-free fit loss before stopping; 0 runs
    /// all `max_epochs`.
    pub patience: usize,
    pub seed: u64,
}

impl Default for CaGcnConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            lambda: 0.5,
            weight_decay: 5e-3,
            learning_rate: 0.01,
            dropout: 0.5,
            max_epochs: 1000,
            patience: 100,
            seed: 0,
        }
    }
}

impl CaGcnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::input("CaGCN hidden size must be positive"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::input("lambda must be nonnegative"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::input("CaGCN weight decay must be nonnegative"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::input("CaGCN learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::input("CaGCN dropout must lie in [0, 1)"));
        }
        if self.max_epochs == 0 {
            return Err(Error::input("CaGCN max_epochs must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaGcnParams {
    /// `w1` is `K×H`, `w2` is `H×1`.
    pub net: GcnParams,
    pub lambda: f64,
    pub weight_decay: f64,
}

impl CaGcnParams {
    pub fn new(net: GcnParams, lambda: f64, weight_decay: f64) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::shape("CaGcnParams: output width", 1, net.output_dim()));
        }
        Ok(Self {
            net,
            lambda,
            weight_decay,
        })
    }

    pub fn init(num_classes: usize, config: &CaGcnConfig) -> Self {
        let mut rng = seed::derived_rng(config.seed, tag::CALIBRATOR, 0);
        Self {
            net: GcnParams::glorot(num_classes, config.hidden, 1, &mut rng),
            lambda: config.lambda,
            weight_decay: config.weight_decay,
        }
    }
}

/// `max(x, 0) + ln(1 + e^{−|x|})`, finite for every finite `x`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_logits(adj: &SparseGraph, logits: &DenseMatrix, params: &CaGcnParams) -> Result<()> {
    if logits.rows() != adj.num_nodes() {
        return Err(Error::shape("cagcn: logit rows", adj.num_nodes(), logits.rows()));
    }
    if logits.cols() != params.net.input_dim() {
        return Err(Error::shape("cagcn: classes", params.net.input_dim(), logits.cols()));
    }
    if params.net.output_dim() != 1 {
        return Err(Error::shape("cagcn: output width", 1, params.net.output_dim()));
    }
    if !logits.all_finite() {
        return Err(Error::input("cagcn: logits are not finite"));
    }
    Ok(())
}

fn divide_rows(logits: &DenseMatrix, temperatures: &[f64]) -> DenseMatrix {
    let mut out = logits.clone();
    for (r, &t) in temperatures.iter().enumerate() {
        out.row_mut(r).iter_mut().for_each(|v| *v /= t);
    }
    out
}

/// Per-node temperatures `softplus(Â · ReLU(Â · V · W1) · W2)` and the
/// calibrated output `v_i / t_i`. `adj` is the normalized adjacency.
pub fn cagcn_forward(adj: &SparseGraph, logits: &DenseMatrix, params: &CaGcnParams) -> Result<CalibratorOutput> {
    check_logits(adj, logits, params)?;
    let raw = forward_cached(adj, &SparseRows::from_dense(logits), &params.net, None)?.output;
    let temperatures: Vec<f64> = raw.as_slice().iter().map(|&r| softplus(r)).collect();
    if temperatures.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::Numerical("CaGCN produced a non-positive temperature".into()));
    }
    CalibratorOutput::from_calibrated(divide_rows(logits, &temperatures), temperatures)
}

/// Indices of the largest and second largest entries; ties resolve to the
/// lower index.
fn top_two(row: &[f64]) -> (usize, usize) {
    let m = argmax(row);
    let mut s = usize::MAX;
    for (k, &v) in row.iter().enumerate() {
        if k != m && (s == usize::MAX || v > row[s]) {
            s = k;
        }
    }
    (m, s)
}

/// Mean over masked nodes of `1 − z_m + z_s` for correct predictions and
/// `z_m − z_s` for incorrect ones, where `z_m` and `z_s` are the two largest
/// probabilities.
pub fn cal_regularizer(probs: &DenseMatrix, labels: &[usize], mask: &[bool]) -> Result<f64> {
    if probs.cols() < 2 {
        return Err(Error::input("calibration regularizer needs at least two classes"));
    }
    if labels.len() != probs.rows() || mask.len() != probs.rows() {
        return Err(Error::shape("cal_regularizer", probs.rows(), labels.len().min(mask.len())));
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for i in (0..probs.rows()).filter(|&i| mask[i]) {
        let z = probs.row(i);
        let (m, s) = top_two(z);
        total += if m == labels[i] { 1.0 - z[m] + z[s] } else { z[m] - z[s] };
        n += 1;
    }
    if n == 0 {
        return Err(Error::input("calibration regularizer mask selects no nodes"));
    }
    Ok(total / n as f64)
}

/// Parts of the CaGCN objective for one forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaGcnLoss {
    /// Summed NLL of the calibrated probabilities over the mask.
    pub nll: f64,
    pub cal: f64,
    /// `weight_decay · (‖W1‖² + ‖W2‖²) / 2`.
    pub penalty: f64,
}

impl CaGcnLoss {
    /// `nll + λ · cal`, the quantity used for early stopping.
    pub fn fit_loss(&self, lambda: f64) -> f64 {
        self.nll + lambda * self.cal
    }

    pub fn total(&self, lambda: f64) -> f64 {
        self.fit_loss(lambda) + self.penalty
    }
}

/// Objective `Σ_masked −log z_i[y_i] + λ·L_cal + weight_decay·‖W‖²/2` and
/// its gradients. The classifier logits are constants.
pub fn cagcn_objective(
    adj: &SparseGraph,
    logits: &DenseMatrix,
    labels: &[usize],
    mask: &[bool],
    params: &CaGcnParams,
    dropout: Option<&DropoutMasks>,
) -> Result<(CaGcnLoss, GcnParams)> {
    check_logits(adj, logits, params)?;
    let k = logits.cols();
    if k < 2 {
        return Err(Error::input("CaGCN needs at least two classes"));
    }
    crate::nn::check_labels(logits, labels, mask)?;
    let n = mask.iter().filter(|&&m| m).count();
    if n == 0 {
        return Err(Error::input("CaGCN fit mask selects no nodes"));
    }
    let input = SparseRows::from_dense(logits);
    let cache: ForwardCache = forward_cached(adj, &input, &params.net, dropout)?;
    let lambda_n = params.lambda / n as f64;

    let mut nll = 0.0;
    let mut cal = 0.0;
    let mut d_raw = DenseMatrix::zeros(logits.rows(), 1);
    let mut z = vec![0.0; k];
    let mut g = vec![0.0; k];
    for i in (0..logits.rows()).filter(|&i| mask[i]) {
        let v = logits.row(i);
        let raw = cache.output.as_slice()[i];
        let t = softplus(raw);
        for (zk, &vk) in z.iter_mut().zip(v) {
            *zk = vk / t;
        }
        softmax_in_place(&mut z);
        let y = labels[i];
        nll -= z[y].max(LOG_CLAMP).ln();

        let (m, s) = top_two(v);
        let sign = if m == y {
            cal += 1.0 - z[m] + z[s];
            1.0
        } else {
            cal += z[m] - z[s];
            -1.0
        };
        for c in 0..k {
            let nll_grad = z[c] - if c == y { 1.0 } else { 0.0 };
            let ds = z[s] * (if c == s { 1.0 } else { 0.0 } - z[c]);
            let dm = z[m] * (if c == m { 1.0 } else { 0.0 } - z[c]);
            g[c] = nll_grad + lambda_n * sign * (ds - dm);
        }
        // v' = v · (1/t)
        let d_inv_t: f64 = g.iter().zip(v).map(|(gc, vc)| gc * vc).sum();
        let d_t = -d_inv_t / (t * t);
        d_raw.as_mut_slice()[i] = d_t * sigmoid(raw);
    }
    let grads = gcn_backward(adj, &input, &params.net, &cache, dropout, &d_raw, params.weight_decay)?;
    let loss = CaGcnLoss {
        nll,
        cal: cal / n as f64,
        penalty: 0.5 * params.weight_decay * params.net.squared_norm(),
    };
    Ok((loss, grads))
}

#[derive(Debug, Clone)]
pub struct CaGcnFit {
    pub params: CaGcnParams,
    /// Dropout-free `nll + λ·cal` of the returned parameters.
    pub best_loss: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Fits CaGCN on the nodes selected by `fit_mask` with Adam. Starts from
/// `init` when given, otherwise from a seeded Glorot draw.
pub fn train_cagcn(
    adj: &SparseGraph,
    logits: &DenseMatrix,
    labels: &[usize],
    fit_mask: &[bool],
    init: Option<&CaGcnParams>,
    config: &CaGcnConfig,
) -> Result<CaGcnFit> {
    config.validate()?;
    let mut params = match init {
        Some(p) => p.clone(),
        None => CaGcnParams::init(logits.cols(), config),
    };
    let hidden = params.net.hidden_dim();
    let mut adam = AdamState::new(&params.net.tensors());
    let adam_cfg = AdamConfig::with_learning_rate(config.learning_rate);
    let mut dropout_rng = seed::derived_rng(config.seed, tag::CALIBRATOR, 1);
    let input = SparseRows::from_dense(logits);

    let (initial, _) = cagcn_objective(adj, logits, labels, fit_mask, &params, None)?;
    let mut best = (initial.fit_loss(params.lambda), params.clone(), 0usize);
    let mut since_best = 0;
    let mut epochs_run = 0;
    for epoch in 1..=config.max_epochs {
        let masks = (config.dropout > 0.0)
            .then(|| DropoutMasks::sample(&input, hidden, config.dropout, &mut dropout_rng));
        let (loss, grads) = cagcn_objective(adj, logits, labels, fit_mask, &params, masks.as_ref())?;
        let total = loss.total(params.lambda);
        if !total.is_finite() {
            return Err(Error::Numerical(format!(
                "CaGCN loss is {total} at epoch {epoch} (nll {}, cal {}, penalty {})",
                loss.nll, loss.cal, loss.penalty
            )));
        }
        adam_step(&mut params.net.tensors_mut(), &grads.tensors(), &mut adam, &adam_cfg)?;
        epochs_run = epoch;

        let (eval, _) = cagcn_objective(adj, logits, labels, fit_mask, &params, None)?;
        let fit = eval.fit_loss(params.lambda);
        if !fit.is_finite() {
            return Err(Error::Numerical(format!("CaGCN fit loss is {fit} after epoch {epoch}")));
        }
        if fit < best.0 {
            best = (fit, params.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience > 0 && since_best >= config.patience {
                break;
            }
        }
    }
    Ok(CaGcnFit {
        params: best.1,
        best_loss: best.0,
        best_epoch: best.2,
        epochs_run,
    })
}

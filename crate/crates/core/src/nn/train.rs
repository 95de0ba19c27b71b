use std::fmt::Write as _;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::dense::{softmax_rows, DenseMatrix};
use super::sparse::SparseRows;
use super::gcn::{forward_cached, gcn_backward, gcn_forward, DropoutMasks, GcnParams};
use super::loss::{accuracy, nll_loss, softmax_nll_grad, Reduction};
use crate::datasets::{LabeledDataset, SplitMasks};
use crate::error::{Error, Result};
use crate::graph::{normalize_sym, SparseGraph};
use crate::seed::{self, tag};

/// Hyperparameters of the classification GCN.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub max_epochs: usize,
    /// Stop after this many epochs without a new best validation loss.
    pub patience: usize,
    pub reduction: Reduction,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            dropout: 0.5,
            max_epochs: 200,
            patience: 100,
            reduction: Reduction::Mean,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::input("hidden size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::input("learning rate must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::input("weight decay must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::input("dropout must lie in [0, 1)"));
        }
        if self.max_epochs == 0 {
            return Err(Error::input("max_epochs must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training NLL of the dropout forward pass that produced the step.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    pub test_nll: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpochLog {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
}

impl EpochLog {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,val_loss,val_acc,test_acc,test_nll";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epoch, r.train_loss, r.val_loss, r.val_acc, r.test_acc, r.test_nll
            )
            .unwrap();
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    pub params: GcnParams,
    pub log: EpochLog,
}

/// Loss and gradients of the classifier objective
/// `reduction(Σ_masked −log softmax(V)[y]) + weight_decay·(‖W1‖² + ‖W2‖²)/2`.
pub fn classifier_objective(
    adj: &SparseGraph,
    features: &DenseMatrix,
    params: &GcnParams,
    dropout: Option<&DropoutMasks>,
    labels: &[usize],
    mask: &[bool],
    reduction: Reduction,
    weight_decay: f64,
) -> Result<(f64, GcnParams)> {
    let features = SparseRows::from_dense(features);
    let cache = forward_cached(adj, &features, params, dropout)?;
    let probs = softmax_rows(&cache.output);
    let nll = nll_loss(&probs, labels, mask)?;
    let factor = reduction.factor(nll.count);
    let loss = factor * nll.total + 0.5 * weight_decay * params.squared_norm();
    let d_logits = softmax_nll_grad(&probs, labels, mask, factor);
    let grads = gcn_backward(adj, &features, params, &cache, dropout, &d_logits, weight_decay)?;
    Ok((loss, grads))
}

/// Trains on `dataset.masks.train` and early-stops on the validation loss.
pub fn train_classifier(dataset: &LabeledDataset, config: &TrainConfig) -> Result<TrainedClassifier> {
    let adj = normalize_sym(&dataset.graph);
    fit_classifier(
        &adj,
        &dataset.features,
        &dataset.labels,
        dataset.num_classes,
        &dataset.masks,
        config,
    )
}

/// Training loop over an already normalized adjacency.
///
/// `labels` may carry pseudo-labels on nodes outside the validation and test
/// masks; only `masks.train` entries are fitted. Returns the parameters of
/// the epoch with the lowest validation loss.
pub fn fit_classifier(
    adj: &SparseGraph,
    features: &DenseMatrix,
    labels: &[usize],
    num_classes: usize,
    masks: &SplitMasks,
    config: &TrainConfig,
) -> Result<TrainedClassifier> {
    config.validate()?;
    if !masks.train.iter().any(|&m| m) {
        return Err(Error::input("training mask selects no nodes"));
    }
    if masks.train.len() != features.rows() {
        return Err(Error::shape("fit_classifier: masks", features.rows(), masks.train.len()));
    }
    let features = &SparseRows::from_dense(features);
    let mut init_rng = seed::derived_rng(config.seed, tag::INIT, 0);
    let mut dropout_rng = seed::derived_rng(config.seed, tag::DROPOUT, 0);
    let mut params = GcnParams::glorot(features.cols(), config.hidden, num_classes, &mut init_rng);
    let mut adam = AdamState::new(&params.tensors());
    let adam_cfg = AdamConfig::with_learning_rate(config.learning_rate);

    let mut log = EpochLog::default();
    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        let masks_drop = (config.dropout > 0.0)
            .then(|| DropoutMasks::sample(features, config.hidden, config.dropout, &mut dropout_rng));
        let (train_loss, grads) = {
            let cache = forward_cached(adj, features, &params, masks_drop.as_ref())?;
            let probs = softmax_rows(&cache.output);
            let nll = nll_loss(&probs, labels, &masks.train)?;
            let factor = config.reduction.factor(nll.count);
            let d_logits = softmax_nll_grad(&probs, labels, &masks.train, factor);
            let grads = gcn_backward(adj, features, &params, &cache, masks_drop.as_ref(), &d_logits, config.weight_decay)?;
            (nll.mean(), grads)
        };
        if !train_loss.is_finite() {
            return Err(Error::Numerical(format!(
                "training loss is {train_loss} at epoch {epoch}"
            )));
        }
        adam_step(&mut params.tensors_mut(), &grads.tensors(), &mut adam, &adam_cfg)?;

        let logits = forward_cached(adj, features, &params, None)?.output;
        if !logits.all_finite() {
            return Err(Error::Numerical(format!("non-finite logits after epoch {epoch}")));
        }
        let probs = softmax_rows(&logits);
        let preds = probs.argmax_rows();
        let val = nll_loss(&probs, labels, &masks.val)?;
        let test = nll_loss(&probs, labels, &masks.test)?;
        let val_loss = if val.count > 0 { val.mean() } else { train_loss };
        log.records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_acc: accuracy(&preds, labels, &masks.val),
            test_acc: accuracy(&preds, labels, &masks.test),
            test_nll: if test.count > 0 { test.mean() } else { f64::NAN },
        });

        if val_loss < best.0 {
            best = (val_loss, params.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience > 0 && since_best >= config.patience {
                break;
            }
        }
    }
    log.best_epoch = best.2;
    Ok(TrainedClassifier { params: best.1, log })
}

/// Logits of the trained model in evaluation mode (no dropout).
pub fn predict_logits(adj: &SparseGraph, features: &DenseMatrix, params: &GcnParams) -> Result<DenseMatrix> {
    gcn_forward(adj, features, params, None)
}

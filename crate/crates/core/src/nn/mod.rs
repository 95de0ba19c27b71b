//! Dense linear algebra, the two-layer GCN classifier with hand-derived
//! gradients, Adam, and the training loop.

mod adam;
mod dense;
mod gcn;
mod loss;
mod sparse;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dense::{argmax, softmax_in_place, softmax_rows, spmm, DenseMatrix};
pub use gcn::{forward_cached, gcn_backward, gcn_forward, DropoutMasks, ForwardCache, GcnParams};
pub(crate) use loss::check_labels;
pub use sparse::SparseRows;
pub use loss::{accuracy, nll_loss, softmax_nll_grad, NllLoss, Reduction, LOG_CLAMP};
pub use train::{
    classifier_objective, fit_classifier, predict_logits, train_classifier, EpochLog, EpochRecord, TrainConfig,
    TrainedClassifier,
};

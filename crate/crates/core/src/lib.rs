//! Graph convolutional classifiers, confidence calibration (temperature
//! scaling, matrix scaling, CaGCN), calibration metrics and calibrated
//! self-training.

pub mod calibration;
pub mod datasets;
pub mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod seed;
pub mod selftrain;

pub use calibration::{CalibratorKind, CalibratorOutput, CaGcnParams};
pub use datasets::{LabeledDataset, SplitMasks};
pub use error::{Error, Result};
pub use graph::{EdgeList, SparseGraph};
pub use nn::{DenseMatrix, GcnParams, TrainConfig};
pub use selftrain::{SelfTrainConfig, StageRecord};

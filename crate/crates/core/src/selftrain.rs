//! Staged self-training with (optionally calibrated) pseudo-labels.

use std::fmt::Write as _;

use crate::calibration::{
    fit_calibrator, CaGcnConfig, CalibrationSettings, CalibratorKind, CalibratorOutput, TemperatureConfig,
};
use crate::datasets::{LabeledDataset, SplitMasks};
use crate::error::{Error, Result};
use crate::graph::normalize_sym;
use crate::nn::{accuracy, fit_classifier, predict_logits, GcnParams, TrainConfig};
use crate::seed::{derive, tag};

#[derive(Debug, Clone, PartialEq)]
pub struct SelfTrainConfig {
    /// Minimum calibrated confidence for a pool node to be pseudo-labeled.
    pub threshold: f64,
    pub max_stages: usize,
    /// `None`, `Temperature` or `CaGcn`.
    pub calibrator: CalibratorKind,
    /// CaGCN settings used inside each stage. Its seed is replaced per stage.
    pub cagcn: CaGcnConfig,
    pub temperature: TemperatureConfig,
    /// Classifier settings. Its seed is replaced per stage.
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for SelfTrainConfig {
    fn default() -> Self {
        Self {
            threshold: 0.8,
            max_stages: 4,
            calibrator: CalibratorKind::CaGcn,
            cagcn: CaGcnConfig {
                learning_rate: 0.001,
                max_epochs: 200,
                ..CaGcnConfig::default()
            },
            temperature: TemperatureConfig::default(),
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

impl SelfTrainConfig {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        let floor = 1.0 / num_classes as f64;
        if !(self.threshold > floor && self.threshold < 1.0) {
            return Err(Error::input(format!(
                "threshold {} must lie in ({floor}, 1)",
                self.threshold
            )));
        }
        if self.max_stages == 0 {
            return Err(Error::input("max_stages must be at least 1"));
        }
        if self.calibrator == CalibratorKind::Matrix {
            return Err(Error::input(
                "self-training supports calibrators none, temperature and cagcn",
            ));
        }
        self.train.validate()?;
        self.cagcn.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    pub added_nodes: usize,
    /// Fraction of the nodes added this stage whose pseudo-label matches the
    /// ground truth; NaN when none were added.
    pub pseudo_label_precision: f64,
    pub test_accuracy: f64,
    /// Ground-truth plus pseudo-labeled nodes the stage's classifier saw.
    pub train_set_size: usize,
}

impl StageRecord {
    pub const CSV_HEADER: &'static str = "stage,added_nodes,pseudo_label_precision,test_accuracy,train_set_size";
}

pub fn stages_to_csv(records: &[StageRecord]) -> String {
    let mut out = String::from(StageRecord::CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.stage, r.added_nodes, r.pseudo_label_precision, r.test_accuracy, r.train_set_size
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone)]
pub struct SelfTrainResult {
    /// Classifier of the last stage that ran.
    pub params: GcnParams,
    pub stages: Vec<StageRecord>,
    /// Pseudo-label of every node added across all stages.
    pub pseudo_labels: Vec<Option<usize>>,
}

impl SelfTrainResult {
    pub fn final_test_accuracy(&self) -> f64 {
        self.stages.last().map_or(f64::NAN, |r| r.test_accuracy)
    }
}

/// Pool nodes with `confidence ≥ threshold`, paired with their predictions.
pub fn select_pseudo_labels(output: &CalibratorOutput, pool: &[bool], threshold: f64) -> Result<Vec<(usize, usize)>> {
    if pool.len() != output.num_nodes() {
        return Err(Error::shape("select_pseudo_labels", output.num_nodes(), pool.len()));
    }
    Ok((0..pool.len())
        .filter(|&i| pool[i] && output.confidence[i] >= threshold)
        .map(|i| (i, output.prediction[i]))
        .collect())
}

/// Runs up to `max_stages` stages. Each stage re-initializes and trains the
/// classifier on the ground-truth training nodes plus all pseudo-labels so
/// far, fits the calibrator on that same training set, and pseudo-labels
/// confident nodes outside the train, validation and test masks. Early
/// stopping always uses the original validation labels. Staging ends early
/// when a stage adds nothing.
pub fn run_self_training(dataset: &LabeledDataset, config: &SelfTrainConfig) -> Result<SelfTrainResult> {
    config.validate(dataset.num_classes)?;
    let n = dataset.num_nodes();
    let adj = normalize_sym(&dataset.graph);
    let mut pool = dataset.masks.unlabeled_pool();
    let mut pseudo_labels: Vec<Option<usize>> = vec![None; n];
    let mut labels = dataset.labels.clone();
    let mut masks = dataset.masks.clone();
    let mut stages = Vec::new();
    let mut final_params = None;

    for stage in 1..=config.max_stages {
        let stage_seed = derive(config.seed, tag::STAGE, stage as u64);
        let train_cfg = TrainConfig {
            seed: stage_seed,
            ..config.train.clone()
        };
        let trained = fit_classifier(&adj, &dataset.features, &labels, dataset.num_classes, &masks, &train_cfg)?;
        let logits = predict_logits(&adj, &dataset.features, &trained.params)?;
        let settings = CalibrationSettings {
            temperature: config.temperature,
            cagcn: CaGcnConfig {
                seed: stage_seed,
                ..config.cagcn.clone()
            },
            ..CalibrationSettings::default()
        };
        let calibrator = fit_calibrator(config.calibrator, &adj, &logits, &labels, &masks.train, &settings)?;
        let output = calibrator.apply(&adj, &logits)?;
        let test_accuracy = accuracy(&output.prediction, &dataset.labels, &dataset.masks.test);

        let selected = select_pseudo_labels(&output, &pool, config.threshold)?;
        let matching = selected.iter().filter(|&&(i, y)| dataset.labels[i] == y).count();
        stages.push(StageRecord {
            stage,
            added_nodes: selected.len(),
            pseudo_label_precision: if selected.is_empty() {
                f64::NAN
            } else {
                matching as f64 / selected.len() as f64
            },
            test_accuracy,
            train_set_size: SplitMasks::count(&masks.train),
        });
        final_params = Some(trained.params);

        for &(i, y) in &selected {
            debug_assert!(pool[i] && !dataset.masks.val[i] && !dataset.masks.test[i] && !dataset.masks.train[i]);
            pool[i] = false;
            pseudo_labels[i] = Some(y);
            labels[i] = y;
            masks.train[i] = true;
        }
        if selected.is_empty() {
            break;
        }
    }
    Ok(SelfTrainResult {
        params: final_params.expect("at least one stage runs"),
        stages,
        pseudo_labels,
    })
}

/// Final test accuracy of self-training at each threshold.
pub fn sweep_thresholds(
    dataset: &LabeledDataset,
    config: &SelfTrainConfig,
    thresholds: &[f64],
) -> Result<Vec<(f64, f64)>> {
    thresholds
        .iter()
        .map(|&threshold| {
            let cfg = SelfTrainConfig {
                threshold,
                ..config.clone()
            };
            Ok((threshold, run_self_training(dataset, &cfg)?.final_test_accuracy()))
        })
        .collect()
}

pub fn sweep_to_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("threshold,test_accuracy\n");
    for (th, acc) in rows {
        writeln!(out, "{th},{acc}").unwrap();
    }
    out
}

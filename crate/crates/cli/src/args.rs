use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "graphcal", version, about = "Train, calibrate and self-train graph convolutional classifiers")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the GCN classifier over one or more seeds.
    Train(TrainCmd),
    /// Fit a calibrator to a checkpoint's logits or to a logits CSV.
    Calibrate(CalibrateCmd),
    /// Staged self-training with calibrated pseudo-labels.
    Selftrain(SelftrainCmd),
    /// Reliability bins and confidence histograms from a predictions CSV.
    Report(ReportCmd),
    /// Write a stochastic block model dataset.
    GenSbm(GenSbmCmd),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Key = value file whose entries act as flags given before the others.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset directory (edges.txt, features.csv, labels.csv, optional masks.csv).
    #[arg(long, value_name = "DIR")]
    pub dataset: PathBuf,
    /// Draw a seeded split with this many training labels per class instead of masks.csv.
    #[arg(long)]
    pub labels_per_class: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub val_size: usize,
    #[arg(long, default_value_t = 1000)]
    pub test_size: usize,
    /// Keep features as stored instead of L1-normalizing each row.
    #[arg(long)]
    pub raw_features: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Base seed; run r uses seed + r.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of runs.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Worker threads for independent runs (0 = all cores).
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReductionArg {
    Mean,
    Sum,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifierArgs {
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Early-stopping window on validation loss (0 disables).
    #[arg(long, default_value_t = 100)]
    pub patience: usize,
    /// How the training NLL is reduced over labeled nodes.
    #[arg(long, value_enum, default_value_t = ReductionArg::Mean)]
    pub reduction: ReductionArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CalibratorArg {
    None,
    Temperature,
    Matrix,
    Cagcn,
}

#[derive(Debug, Clone, Args)]
pub struct CaGcnArgs {
    /// Weight of the calibration regularizer.
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long)]
    pub cal_weight_decay: Option<f64>,
    #[arg(long)]
    pub cal_lr: Option<f64>,
    #[arg(long)]
    pub cal_epochs: Option<usize>,
    #[arg(long)]
    pub cal_patience: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub cal_dropout: f64,
    #[arg(long, default_value_t = 16)]
    pub cal_hidden: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitSplit {
    Val,
    Train,
}

#[derive(Debug, Clone, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateCmd {
    #[command(flatten)]
    pub common: Common,
    /// Dataset providing the graph, labels and (without a checkpoint) the split.
    #[command(flatten)]
    pub data: DataArgs,
    /// Checkpoint directory, or a `train` output directory holding several.
    #[arg(long, value_name = "DIR", conflicts_with = "logits")]
    pub checkpoint: Option<PathBuf>,
    /// Logits CSV with header node_id,l0,...
    #[arg(long, value_name = "FILE")]
    pub logits: Option<PathBuf>,
    /// Seed for the split (with --labels-per-class) and the calibrator.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = CalibratorArg::Cagcn)]
    pub calibrator: CalibratorArg,
    #[arg(long, value_enum, default_value_t = FitSplit::Val)]
    pub fit_split: FitSplit,
    #[command(flatten)]
    pub cagcn: CaGcnArgs,
    #[arg(long, default_value_t = 1e-2)]
    pub odir_lambda: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub odir_mu: f64,
    /// Reliability bins.
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SelftrainCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[arg(long, value_enum, default_value_t = CalibratorArg::Cagcn)]
    pub calibrator: CalibratorArg,
    #[arg(long, default_value_t = 0.8)]
    pub threshold: f64,
    #[arg(long, default_value_t = 4)]
    pub stages: usize,
    #[command(flatten)]
    pub cagcn: CaGcnArgs,
    /// Thresholds to sweep: a comma list, or `lo..hi` for the standard grid
    /// 0.8, 0.85, 0.9, 0.95, 0.99 restricted to [lo, hi].
    #[arg(long, value_name = "LIST")]
    pub sweep_threshold: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportCmd {
    #[command(flatten)]
    pub common: Common,
    /// CSV written by `calibrate` (node_id,l0,...,temperature,confidence).
    #[arg(long, value_name = "FILE", required_unless_present = "logits", conflicts_with = "logits")]
    pub predictions: Option<PathBuf>,
    /// Plain logits CSV; reported after softmax.
    #[arg(long, value_name = "FILE")]
    pub logits: Option<PathBuf>,
    /// Labels CSV (node_id,class).
    #[arg(long, value_name = "FILE", required_unless_present = "dataset", conflicts_with = "dataset")]
    pub labels: Option<PathBuf>,
    /// Dataset directory; supplies labels, masks and the graph for total variation.
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Nodes to report on.
    #[arg(long, value_enum, default_value_t = ReportSplit::Test)]
    pub split: ReportSplit,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportSplit {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct GenSbmCmd {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1500)]
    pub nodes: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 0.05)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.005)]
    pub p_out: f64,
    #[arg(long, default_value_t = 16)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 8.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 10)]
    pub labels_per_class: usize,
    #[arg(long, default_value_t = 300)]
    pub val_size: usize,
    #[arg(long, default_value_t = 600)]
    pub test_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

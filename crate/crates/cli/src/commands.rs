use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use graphcal::calibration::{
    fit_calibrator, logits_to_csv, read_logits_csv, CaGcnConfig, CalibrationSettings, CalibratorKind,
    CalibratorOutput, FittedCalibrator, MatrixScalingConfig,
};
use graphcal::datasets::{
    load_dataset, read_labels, read_masks, save_dataset, LoadOptions, SplitSpec, EDGES_FILE, LABELS_FILE, MASKS_FILE,
};
use graphcal::graph::{build_csr, generate_sbm, normalize_sym, EdgeList, SbmConfig};
use graphcal::io;
use graphcal::metrics::{confidence_histogram, evaluate, reliability_report, select, select_rows, ScalarMetrics};
use graphcal::nn::{predict_logits, train_classifier, Reduction};
use graphcal::seed::{derive, tag};
use graphcal::selftrain::{run_self_training, stages_to_csv, SelfTrainConfig};
use graphcal::{Error, LabeledDataset, Result, SparseGraph, TrainConfig};

use crate::args::*;
use crate::checkpoint::{self, Manifest, SplitSource};

fn input_error(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}

/// Seeds of the runs: `seed, seed + 1, …`.
fn run_seeds(run: &RunArgs) -> Result<Vec<u64>> {
    if run.seeds == 0 {
        return Err(input_error("--seeds must be at least 1"));
    }
    (0..run.seeds)
        .map(|r| {
            run.seed
                .checked_add(r)
                .ok_or_else(|| input_error("--seed + --seeds overflows"))
        })
        .collect()
}

/// Runs `job` once per seed, in parallel when `threads != 1`. Results keep
/// seed order.
fn for_each_seed<T: Send>(seeds: &[u64], threads: usize, job: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    if threads == 1 || seeds.len() == 1 {
        return seeds.iter().map(|&s| job(s)).collect();
    }
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| input_error(format!("cannot start worker threads: {e}")))?;
    pool.install(|| seeds.par_iter().map(|&s| job(s)).collect())
}

fn run_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

fn split_source(data: &DataArgs, seed: u64) -> SplitSource {
    let generated = |labels_per_class| SplitSource::Generated {
        labels_per_class,
        val_size: data.val_size,
        test_size: data.test_size,
        seed: derive(seed, tag::SPLIT, 0),
    };
    match data.labels_per_class {
        Some(lpc) => generated(lpc),
        None if data.dataset.join(MASKS_FILE).exists() => SplitSource::File,
        None => generated(SplitSpec::default().labels_per_class),
    }
}

fn load(dir: &Path, split: &SplitSource, raw_features: bool) -> Result<LabeledDataset> {
    let options = match split {
        SplitSource::File => LoadOptions {
            row_normalize: !raw_features,
            ..LoadOptions::default()
        },
        SplitSource::Generated {
            labels_per_class,
            val_size,
            test_size,
            seed,
        } => LoadOptions {
            row_normalize: !raw_features,
            split: Some((
                SplitSpec {
                    labels_per_class: *labels_per_class,
                    val_size: *val_size,
                    test_size: *test_size,
                },
                *seed,
            )),
            force_split: true,
        },
    };
    load_dataset(dir, &options)
}

fn train_config(args: &ClassifierArgs, seed: u64) -> Result<TrainConfig> {
    let config = TrainConfig {
        hidden: args.hidden,
        learning_rate: args.lr,
        weight_decay: args.weight_decay,
        dropout: args.dropout,
        max_epochs: args.epochs,
        patience: args.patience,
        reduction: match args.reduction {
            ReductionArg::Mean => Reduction::Mean,
            ReductionArg::Sum => Reduction::Sum,
        },
        seed,
    };
    config.validate()?;
    Ok(config)
}

fn cagcn_config(args: &CaGcnArgs, base: CaGcnConfig, seed: u64) -> Result<CaGcnConfig> {
    let config = CaGcnConfig {
        hidden: args.cal_hidden,
        lambda: args.lambda,
        weight_decay: args.cal_weight_decay.unwrap_or(base.weight_decay),
        learning_rate: args.cal_lr.unwrap_or(base.learning_rate),
        dropout: args.cal_dropout,
        max_epochs: args.cal_epochs.unwrap_or(base.max_epochs),
        patience: args.cal_patience.unwrap_or(base.patience),
        seed: derive(seed, tag::CALIBRATOR, 0),
    };
    config.validate()?;
    Ok(config)
}

fn calibrator_kind(arg: CalibratorArg) -> CalibratorKind {
    match arg {
        CalibratorArg::None => CalibratorKind::None,
        CalibratorArg::Temperature => CalibratorKind::Temperature,
        CalibratorArg::Matrix => CalibratorKind::Matrix,
        CalibratorArg::Cagcn => CalibratorKind::CaGcn,
    }
}

/// Population mean and standard deviation.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn stat_line(out: &mut String, name: &str, values: &[f64]) {
    let (mean, std) = mean_std(values);
    writeln!(out, "{name} = {mean:.6} ± {std:.6}").unwrap();
}

fn metrics_table(out: &mut String, prefix: &str, rows: &[(u64, ScalarMetrics)]) {
    let pick = |f: fn(&ScalarMetrics) -> f64| rows.iter().map(|(_, m)| f(m)).collect::<Vec<_>>();
    stat_line(out, &format!("{prefix}accuracy"), &pick(|m| m.accuracy));
    stat_line(out, &format!("{prefix}ece"), &pick(|m| m.ece));
    stat_line(out, &format!("{prefix}nll"), &pick(|m| m.nll));
    stat_line(out, &format!("{prefix}brier"), &pick(|m| m.brier));
    stat_line(out, &format!("{prefix}total_variation"), &pick(|m| m.total_variation));
}

fn finish_summary(out: &Path, summary: &str) -> Result<()> {
    io::write_string(&out.join("summary.txt"), summary)?;
    print!("{summary}");
    Ok(())
}

pub fn train(cmd: &TrainCmd) -> Result<()> {
    let seeds = run_seeds(&cmd.run)?;
    train_config(&cmd.classifier, 0)?;
    let results = for_each_seed(&seeds, cmd.run.threads, |seed| {
        let split = split_source(&cmd.data, seed);
        let dataset = load(&cmd.data.dataset, &split, cmd.data.raw_features)?;
        let trained = train_classifier(&dataset, &train_config(&cmd.classifier, seed)?)?;
        let adj = normalize_sym(&dataset.graph);
        let logits = predict_logits(&adj, &dataset.features, &trained.params)?;
        let output = CalibratorOutput::uncalibrated(&logits)?;
        let (_, metrics) = evaluate(&dataset.graph, &output.probs, &dataset.labels, &dataset.masks.test, 20)?;

        let dir = run_dir(&cmd.common.out, seed);
        io::write_string(&dir.join("epoch_log.csv"), &trained.log.to_csv())?;
        io::write_string(&dir.join("logits.csv"), &logits_to_csv(&logits))?;
        io::write_string(&dir.join("metrics.txt"), &metrics.to_key_values("test."))?;
        checkpoint::write(
            &dir,
            &trained.params,
            &Manifest {
                seed,
                split,
                raw_features: cmd.data.raw_features,
                best_epoch: trained.log.best_epoch,
            },
        )?;
        Ok((seed, metrics))
    })?;

    let mut summary = format!("runs = {}\n", results.len());
    metrics_table(&mut summary, "test_", &results);
    summary.push_str("seed,test_accuracy,test_ece,test_nll,test_brier\n");
    for (seed, m) in &results {
        writeln!(summary, "{seed},{},{},{},{}", m.accuracy, m.ece, m.nll, m.brier).unwrap();
    }
    finish_summary(&cmd.common.out, &summary)
}

/// Logits, dataset, seed and output directory of one calibration job.
struct CalibrationInput {
    name: Option<String>,
    logits: graphcal::DenseMatrix,
    dataset: LabeledDataset,
    seed: u64,
}

fn checkpoint_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.join(checkpoint::MANIFEST).exists() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(checkpoint::MANIFEST).exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(input_error(format!(
            "{} holds no {} (neither directly nor in a subdirectory)",
            dir.display(),
            checkpoint::MANIFEST
        )));
    }
    Ok(dirs)
}

fn calibration_inputs(cmd: &CalibrateCmd) -> Result<Vec<CalibrationInput>> {
    if let Some(path) = &cmd.logits {
        let split = split_source(&cmd.data, cmd.seed);
        let dataset = load(&cmd.data.dataset, &split, cmd.data.raw_features)?;
        let logits = read_logits_csv(path)?;
        if logits.rows() != dataset.num_nodes() {
            return Err(input_error(format!(
                "{} has {} rows but the dataset has {} nodes",
                path.display(),
                logits.rows(),
                dataset.num_nodes()
            )));
        }
        return Ok(vec![CalibrationInput {
            name: None,
            logits,
            dataset,
            seed: cmd.seed,
        }]);
    }
    let Some(dir) = &cmd.checkpoint else {
        return Err(input_error("calibrate needs --checkpoint or --logits"));
    };
    let dirs = checkpoint_dirs(dir)?;
    let several = dirs.len() > 1;
    dirs.iter()
        .map(|d| {
            let (params, manifest) = checkpoint::read(d)?;
            let dataset = load(&cmd.data.dataset, &manifest.split, manifest.raw_features)?;
            let adj = normalize_sym(&dataset.graph);
            let logits = predict_logits(&adj, &dataset.features, &params)?;
            Ok(CalibrationInput {
                name: several.then(|| d.file_name().unwrap_or_default().to_string_lossy().into_owned()),
                logits,
                dataset,
                seed: manifest.seed,
            })
        })
        .collect()
}

fn calibrator_line(fitted: &FittedCalibrator, output: &CalibratorOutput) -> String {
    match fitted {
        FittedCalibrator::None => String::new(),
        FittedCalibrator::Temperature(fit) => format!("temperature={}\n", fit.temperature),
        FittedCalibrator::Matrix(_) => String::new(),
        FittedCalibrator::CaGcn(_) => {
            let (mean, std) = mean_std(&output.temperatures);
            format!("mean_temperature={mean}\nstd_temperature={std}\n")
        }
    }
}

pub fn calibrate(cmd: &CalibrateCmd) -> Result<()> {
    if cmd.bins == 0 {
        return Err(input_error("--bins must be positive"));
    }
    let kind = calibrator_kind(cmd.calibrator);
    cagcn_config(&cmd.cagcn, CaGcnConfig::default(), cmd.seed)?;
    let inputs = calibration_inputs(cmd)?;
    let mut rows = Vec::new();
    for input in &inputs {
        let ds = &input.dataset;
        let adj = normalize_sym(&ds.graph);
        let fit_mask = match cmd.fit_split {
            FitSplit::Val => &ds.masks.val,
            FitSplit::Train => &ds.masks.train,
        };
        let settings = CalibrationSettings {
            matrix: MatrixScalingConfig {
                odir_lambda: cmd.odir_lambda,
                odir_mu: cmd.odir_mu,
                ..MatrixScalingConfig::default()
            },
            cagcn: cagcn_config(&cmd.cagcn, CaGcnConfig::default(), input.seed)?,
            ..CalibrationSettings::default()
        };
        let fitted = fit_calibrator(kind, &adj, &input.logits, &ds.labels, fit_mask, &settings)?;
        let before = CalibratorOutput::uncalibrated(&input.logits)?;
        let after = fitted.apply(&adj, &input.logits)?;

        let dir = match &input.name {
            Some(name) => cmd.common.out.join(name),
            None => cmd.common.out.clone(),
        };
        let mut text = format!(
            "calibrator={}\nfit_split={}\nseed={}\n",
            kind,
            match cmd.fit_split {
                FitSplit::Val => "val",
                FitSplit::Train => "train",
            },
            input.seed
        );
        text.push_str(&calibrator_line(&fitted, &after));
        let mut json = serde_json::Map::new();
        json.insert("calibrator".into(), kind.name().into());
        json.insert("seed".into(), input.seed.into());
        let mut evaluated = Vec::new();
        for (name, output) in [("before", &before), ("after", &after)] {
            let (report, metrics) = evaluate(&ds.graph, &output.probs, &ds.labels, &ds.masks.test, cmd.bins)?;
            let test_conf = select(&output.confidence, &ds.masks.test);
            let test_correct = select(&output.correct(&ds.labels), &ds.masks.test);
            let histogram = confidence_histogram(&test_conf, &test_correct, cmd.bins)?;
            io::write_string(&dir.join(format!("reliability_{name}.csv")), &report.to_csv())?;
            io::write_string(&dir.join(format!("histogram_{name}.csv")), &histogram.to_csv())?;
            text.push_str(&metrics.to_key_values(&format!("{name}.")));
            json.insert(
                name.into(),
                serde_json::to_value(metrics).map_err(|e| input_error(e.to_string()))?,
            );
            evaluated.push(metrics);
        }
        io::write_string(&dir.join("calibrated.csv"), &after.to_csv())?;
        io::write_string(&dir.join("metrics.txt"), &text)?;
        let json_text = serde_json::to_string_pretty(&serde_json::Value::Object(json))
            .map_err(|e| input_error(e.to_string()))?;
        io::write_string(&dir.join("metrics.json"), &(json_text + "\n"))?;
        rows.push((input.seed, evaluated[0], evaluated[1]));
    }

    let mut summary = format!("calibrator = {kind}\nruns = {}\n", rows.len());
    let before: Vec<_> = rows.iter().map(|(s, b, _)| (*s, *b)).collect();
    let after: Vec<_> = rows.iter().map(|(s, _, a)| (*s, *a)).collect();
    metrics_table(&mut summary, "before_", &before);
    metrics_table(&mut summary, "after_", &after);
    finish_summary(&cmd.common.out, &summary)
}

/// Parses `0.8,0.9` or `lo..hi` (standard grid within the range).
pub fn parse_thresholds(spec: &str) -> Result<Vec<f64>> {
    const GRID: [f64; 5] = [0.8, 0.85, 0.9, 0.95, 0.99];
    let bad = || input_error(format!("invalid --sweep-threshold {spec:?}"));
    let values: Vec<f64> = if let Some((lo, hi)) = spec.split_once("..") {
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        GRID.into_iter().filter(|&t| t >= lo - 1e-12 && t <= hi + 1e-12).collect()
    } else {
        spec.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if values.is_empty() || values.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(bad());
    }
    Ok(values)
}

pub fn selftrain(cmd: &SelftrainCmd) -> Result<()> {
    let seeds = run_seeds(&cmd.run)?;
    let kind = calibrator_kind(cmd.calibrator);
    if kind == CalibratorKind::Matrix {
        return Err(input_error("selftrain supports --calibrator none, temperature or cagcn"));
    }
    if !(cmd.threshold > 0.0 && cmd.threshold < 1.0) {
        return Err(input_error("--threshold must lie in (0, 1)"));
    }
    let sweep = cmd.sweep_threshold.as_deref().map(parse_thresholds).transpose()?;
    let base = SelfTrainConfig::default();
    let make_config = |seed: u64, threshold: f64| -> Result<SelfTrainConfig> {
        Ok(SelfTrainConfig {
            threshold,
            max_stages: cmd.stages,
            calibrator: kind,
            cagcn: cagcn_config(&cmd.cagcn, base.cagcn.clone(), seed)?,
            temperature: base.temperature,
            train: train_config(&cmd.classifier, seed)?,
            seed,
        })
    };
    make_config(cmd.run.seed, cmd.threshold)?;

    let results = for_each_seed(&seeds, cmd.run.threads, |seed| {
        let split = split_source(&cmd.data, seed);
        let dataset = load(&cmd.data.dataset, &split, cmd.data.raw_features)?;
        let config = make_config(seed, cmd.threshold)?;
        config.validate(dataset.num_classes)?;
        let result = run_self_training(&dataset, &config)?;
        let dir = run_dir(&cmd.common.out, seed);
        io::write_string(&dir.join("stages.csv"), &stages_to_csv(&result.stages))?;
        checkpoint::write(
            &dir,
            &result.params,
            &Manifest {
                seed,
                split: split.clone(),
                raw_features: cmd.data.raw_features,
                best_epoch: 0,
            },
        )?;
        let sweep_rows = match &sweep {
            Some(thresholds) => thresholds
                .iter()
                .map(|&th| Ok(run_self_training(&dataset, &make_config(seed, th)?)?.final_test_accuracy()))
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        let added: usize = result.stages.iter().map(|s| s.added_nodes).sum();
        Ok((seed, result.final_test_accuracy(), result.stages.len(), added, sweep_rows))
    })?;

    let mut summary = format!(
        "calibrator = {kind}\nthreshold = {}\nmax_stages = {}\nruns = {}\n",
        cmd.threshold,
        cmd.stages,
        results.len()
    );
    let accs: Vec<f64> = results.iter().map(|r| r.1).collect();
    stat_line(&mut summary, "test_accuracy", &accs);
    summary.push_str("seed,test_accuracy,stages,pseudo_labels\n");
    for (seed, acc, stages, added, _) in &results {
        writeln!(summary, "{seed},{acc},{stages},{added}").unwrap();
    }
    if let Some(thresholds) = &sweep {
        let mut table = String::from("threshold,mean_test_accuracy,std_test_accuracy\n");
        for (t, th) in thresholds.iter().enumerate() {
            let (mean, std) = mean_std(&results.iter().map(|r| r.4[t]).collect::<Vec<_>>());
            writeln!(table, "{th},{mean},{std}").unwrap();
        }
        io::write_string(&cmd.common.out.join("sweep.csv"), &table)?;
    }
    finish_summary(&cmd.common.out, &summary)
}

pub fn report(cmd: &ReportCmd) -> Result<()> {
    if cmd.bins == 0 {
        return Err(input_error("--bins must be positive"));
    }
    let output = match (&cmd.predictions, &cmd.logits) {
        (Some(path), _) => CalibratorOutput::read_csv(path)?,
        (None, Some(path)) => CalibratorOutput::uncalibrated(&read_logits_csv(path)?)?,
        (None, None) => return Err(input_error("report needs --predictions or --logits")),
    };
    let n = output.num_nodes();
    let (labels, masks, graph): (Vec<usize>, Option<_>, Option<SparseGraph>) = match (&cmd.labels, &cmd.dataset) {
        (Some(path), _) => (read_labels(path)?, None, None),
        (None, Some(dir)) => {
            let labels = read_labels(&dir.join(LABELS_FILE))?;
            let masks_path = dir.join(MASKS_FILE);
            let masks = if masks_path.exists() {
                Some(read_masks(&masks_path, labels.len())?)
            } else {
                None
            };
            let graph = build_csr(&EdgeList::read(&dir.join(EDGES_FILE))?, labels.len())?;
            (labels, masks, Some(graph))
        }
        (None, None) => return Err(input_error("report needs --labels or --dataset")),
    };
    if labels.len() != n {
        return Err(input_error(format!("predictions cover {n} nodes but labels cover {}", labels.len())));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= output.probs.cols()) {
        return Err(input_error(format!("label {y} outside the {} predicted classes", output.probs.cols())));
    }
    let mask = match (cmd.split, &masks) {
        (ReportSplit::All, _) => vec![true; n],
        (split, Some(m)) => match split {
            ReportSplit::Train => m.train.clone(),
            ReportSplit::Val => m.val.clone(),
            _ => m.test.clone(),
        },
        // Without masks the whole file is the report population.
        (_, None) => vec![true; n],
    };
    let metrics = match &graph {
        Some(g) => evaluate(g, &output.probs, &labels, &mask, cmd.bins)?.1,
        None => {
            let r = reliability_report(&select_rows(&output.probs, &mask), &select(&labels, &mask), cmd.bins)?;
            ScalarMetrics {
                nodes: select(&labels, &mask).len(),
                accuracy: r.accuracy,
                ece: r.ece,
                nll: r.nll,
                brier: r.brier,
                total_variation: f64::NAN,
            }
        }
    };
    let report = reliability_report(&select_rows(&output.probs, &mask), &select(&labels, &mask), cmd.bins)?;
    let histogram = confidence_histogram(
        &select(&output.confidence, &mask),
        &select(&output.correct(&labels), &mask),
        cmd.bins,
    )?;
    let out = &cmd.common.out;
    io::write_string(&out.join("reliability.csv"), &report.to_csv())?;
    io::write_string(&out.join("histogram.csv"), &histogram.to_csv())?;
    let text = metrics.to_key_values("");
    io::write_string(&out.join("metrics.txt"), &text)?;
    let json = serde_json::to_string_pretty(&metrics).map_err(|e| input_error(e.to_string()))?;
    io::write_string(&out.join("metrics.json"), &(json + "\n"))?;
    print!("{text}");
    Ok(())
}

pub fn gen_sbm(cmd: &GenSbmCmd) -> Result<()> {
    let config = SbmConfig {
        num_nodes: cmd.nodes,
        num_classes: cmd.classes,
        p_in: cmd.p_in,
        p_out: cmd.p_out,
        feature_dim: cmd.feature_dim,
        feature_noise: cmd.noise,
        split: SplitSpec {
            labels_per_class: cmd.labels_per_class,
            val_size: cmd.val_size,
            test_size: cmd.test_size,
        },
        seed: cmd.seed,
    };
    let dataset = generate_sbm(&config)?;
    save_dataset(&dataset, &cmd.common.out)?;
    println!("{}", dataset.summary());
    Ok(())
}

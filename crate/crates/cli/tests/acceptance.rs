//! Acceptance suite: one PASS/FAIL/BLOCKED line per criterion.
//!
//! Cora-based criteria read the dataset directory named by `CAGCN_CORA_DIR`
//! (default `data/cora` at the workspace root). Without it they report
//! BLOCKED and the SBM stand-in runs where one is defined.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use graphcal::calibration::{
    apply_temperature, cagcn_forward, cagcn_objective, confidence_at, fit_calibrator, fit_temperature,
    temperature_for_confidence, CaGcnConfig, CaGcnParams, CalibrationSettings, CalibratorKind, CalibratorOutput,
    TemperatureConfig,
};
use graphcal::datasets::{load_dataset, LoadOptions, SplitSpec};
use graphcal::graph::{build_csr, generate_sbm, normalize_sym, EdgeList, SbmConfig};
use graphcal::metrics::{brier, ece, evaluate, reliability_report, select, select_rows, total_variation};
use graphcal::nn::{
    argmax, classifier_objective, forward_cached, predict_logits, softmax_rows, train_classifier, DenseMatrix,
    DropoutMasks, GcnParams, Reduction, SparseRows,
};
use graphcal::seed::{self, derive, tag};
use graphcal::selftrain::{run_self_training, SelfTrainConfig};
use graphcal::{LabeledDataset, SparseGraph, TrainConfig};
use rand::Rng as _;

enum Outcome {
    Pass(String),
    Fail(String),
    Blocked(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn random_matrix(rng: &mut seed::Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> DenseMatrix {
    DenseMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

fn random_edges(rng: &mut seed::Rng, n: usize, p: f64) -> EdgeList {
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < p {
                pairs.push((i, j));
            }
        }
        if rng.random::<f64>() < 0.1 {
            pairs.push((i, i));
        }
    }
    EdgeList::new(pairs)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences of `f` over every entry of both weight matrices.
fn numeric_gradient(params: &GcnParams, f: impl Fn(&GcnParams) -> f64) -> [Vec<f64>; 2] {
    let h = 1e-5;
    let mut out = [Vec::new(), Vec::new()];
    for (layer, grads) in out.iter_mut().enumerate() {
        for idx in 0..params.tensors()[layer].as_slice().len() {
            let mut plus = params.clone();
            plus.tensors_mut()[layer].as_mut_slice()[idx] += h;
            let mut minus = params.clone();
            minus.tensors_mut()[layer].as_mut_slice()[idx] -= h;
            grads.push((f(&plus) - f(&minus)) / (2.0 * h));
        }
    }
    out
}

/// Every pre-activation at least 1e-3 away from the ReLU kink.
fn away_from_kink(adj: &SparseGraph, x: &DenseMatrix, params: &GcnParams, masks: Option<&DropoutMasks>) -> bool {
    let cache = forward_cached(adj, &SparseRows::from_dense(x), params, masks).unwrap();
    cache.pre_activation.as_slice().iter().all(|v| v.abs() > 1e-3)
}

fn criterion_1() -> Outcome {
    let (n, f, h, k) = (8, 5, 4, 3);
    let mut worst_cls: f64 = 0.0;
    let mut worst_cal: f64 = 0.0;
    let mut rng = seed::rng(0xF1);
    let mut done = 0;
    while done < 20 {
        let adj = normalize_sym(&build_csr(&random_edges(&mut rng, n, 0.3), n).unwrap());
        let x = random_matrix(&mut rng, n, f, -1.0, 1.0);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let mut mask: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.6).collect();
        mask[0] = true;
        let params = GcnParams::glorot(f, h, k, &mut rng);
        let masks = (done % 2 == 1).then(|| DropoutMasks::sample(&SparseRows::from_dense(&x), h, 0.5, &mut rng));
        let reduction = if done % 4 < 2 { Reduction::Sum } else { Reduction::Mean };

        let logits = random_matrix(&mut rng, n, k, -3.0, 3.0);
        let cal = CaGcnParams::new(GcnParams::glorot(k, h, 1, &mut rng), 0.5, 5e-3).unwrap();
        if !away_from_kink(&adj, &x, &params, masks.as_ref()) || !away_from_kink(&adj, &logits, &cal.net, None) {
            continue;
        }

        let objective = |p: &GcnParams| {
            classifier_objective(&adj, &x, p, masks.as_ref(), &labels, &mask, reduction, 5e-4)
                .unwrap()
                .0
        };
        let (_, analytic) =
            classifier_objective(&adj, &x, &params, masks.as_ref(), &labels, &mask, reduction, 5e-4).unwrap();
        let numeric = numeric_gradient(&params, objective);
        for layer in 0..2 {
            worst_cls = worst_cls.max(relative_error(&numeric[layer], analytic.tensors()[layer].as_slice()));
        }

        let cal_objective = |net: &GcnParams| {
            let p = CaGcnParams {
                net: net.clone(),
                ..cal.clone()
            };
            cagcn_objective(&adj, &logits, &labels, &mask, &p, None).unwrap().0.total(p.lambda)
        };
        let (_, analytic) = cagcn_objective(&adj, &logits, &labels, &mask, &cal, None).unwrap();
        let numeric = numeric_gradient(&cal.net, cal_objective);
        for layer in 0..2 {
            worst_cal = worst_cal.max(relative_error(&numeric[layer], analytic.tensors()[layer].as_slice()));
        }
        done += 1;
    }
    check(
        worst_cls < 1e-5 && worst_cal < 1e-5,
        format!("20 instances, max relative error classifier {worst_cls:.2e}, CaGCN {worst_cal:.2e}"),
    )
}

fn oracle_ece(conf: &[f64], correct: &[bool], m: usize) -> f64 {
    let n = conf.len() as f64;
    let mut total = 0.0;
    for b in 0..m {
        let lo = b as f64 / m as f64;
        let hi = (b + 1) as f64 / m as f64;
        let members: Vec<usize> = (0..conf.len())
            .filter(|&i| (conf[i] > lo || (b == 0 && conf[i] >= lo)) && conf[i] <= hi)
            .collect();
        if members.is_empty() {
            continue;
        }
        let c = members.len() as f64;
        let acc = members.iter().filter(|&&i| correct[i]).count() as f64 / c;
        let mean_conf = members.iter().map(|&i| conf[i]).sum::<f64>() / c;
        total += c / n * (acc - mean_conf).abs();
    }
    total
}

fn criterion_2() -> Outcome {
    let mut rng = seed::rng(0xF2);
    let mut worst: f64 = 0.0;
    for inst in 0..100 {
        let n = rng.random_range(1..60);
        let k = rng.random_range(2..7);
        let mut logits = random_matrix(&mut rng, n, k, -4.0, 4.0);
        if inst % 5 == 0 {
            // Equal logits put confidences exactly on bin edges such as 1/2 and 1/4.
            for i in 0..n.min(3) {
                logits.row_mut(i).fill(0.0);
            }
        }
        let probs = softmax_rows(&logits);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let conf: Vec<f64> = probs.iter_rows().map(|r| r.iter().copied().fold(0.0, f64::max)).collect();
        let correct: Vec<bool> = (0..n).map(|i| argmax(probs.row(i)) == labels[i]).collect();
        let m = [10, 15, 20][inst % 3];

        let ece_err = (ece(&conf, &correct, m).unwrap() - oracle_ece(&conf, &correct, m)).abs();
        let brier_oracle = (0..n)
            .map(|i| (0..k).map(|c| (probs[(i, c)] - if c == labels[i] { 1.0 } else { 0.0 }).powi(2)).sum::<f64>())
            .sum::<f64>()
            / n as f64;
        let brier_err = (brier(&probs, &labels).unwrap() - brier_oracle).abs();
        let nll_oracle = (0..n).map(|i| -probs[(i, labels[i])].ln()).sum::<f64>() / n as f64;
        let report = reliability_report(&probs, &labels, m).unwrap();
        let nll_err = (report.nll - nll_oracle).abs();

        let edges = random_edges(&mut rng, n, 0.2);
        let graph = build_csr(&edges, n).unwrap();
        let undirected: BTreeSet<(usize, usize)> = edges
            .pairs
            .iter()
            .filter(|(a, b)| a != b)
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect();
        let tv_oracle: f64 = undirected.iter().map(|&(a, b)| (conf[a] - conf[b]).abs()).sum();
        let tv_err = (total_variation(&graph, &conf).unwrap() - tv_oracle).abs();
        worst = worst.max(ece_err).max(brier_err).max(nll_err).max(tv_err);
    }
    check(
        worst <= 1e-12,
        format!("100 instances, ECE/Brier/NLL/TV max deviation from oracles {worst:.1e}"),
    )
}

fn sbm_dataset(seed_value: u64) -> LabeledDataset {
    generate_sbm(&SbmConfig {
        seed: seed_value,
        ..SbmConfig::default()
    })
    .unwrap()
}

fn criterion_3(cora: Option<&LabeledDataset>) -> Outcome {
    let mut rng = seed::rng(0xF3);
    let mut mismatches = 0usize;
    for inst in 0..1000 {
        let n = rng.random_range(1..40);
        let k = rng.random_range(2..10);
        let logits = random_matrix(&mut rng, n, k, -10.0, 10.0);
        let output = if inst % 4 == 0 {
            let adj = normalize_sym(&build_csr(&random_edges(&mut rng, n, 0.2), n).unwrap());
            let scale = rng.random_range(0.1..5.0);
            let mut net = GcnParams::glorot(k, 16, 1, &mut rng);
            net.w2.scale(scale);
            cagcn_forward(&adj, &logits, &CaGcnParams::new(net, 0.5, 0.0).unwrap()).unwrap()
        } else {
            let temps: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect();
            let mut scaled = logits.clone();
            for (i, t) in temps.iter().enumerate() {
                scaled.row_mut(i).iter_mut().for_each(|v| *v /= t);
            }
            CalibratorOutput::from_calibrated(scaled, temps).unwrap()
        };
        if output.prediction != logits.argmax_rows() {
            mismatches += 1;
        }
    }

    let (ds, name) = match cora {
        Some(ds) => (ds.clone(), "Cora"),
        None => (sbm_dataset(0), "SBM"),
    };
    let trained = train_classifier(&ds, &TrainConfig::default()).unwrap();
    let adj = normalize_sym(&ds.graph);
    let logits = predict_logits(&adj, &ds.features, &trained.params).unwrap();
    let settings = CalibrationSettings::default();
    let fitted = fit_calibrator(CalibratorKind::CaGcn, &adj, &logits, &ds.labels, &ds.masks.val, &settings).unwrap();
    let before = CalibratorOutput::uncalibrated(&logits).unwrap();
    let after = fitted.apply(&adj, &logits).unwrap();
    let acc = |o: &CalibratorOutput| graphcal::nn::accuracy(&o.prediction, &ds.labels, &ds.masks.test);
    let (a, b) = (acc(&before), acc(&after));
    check(
        mismatches == 0 && a == b,
        format!("1000 random matrices, {mismatches} argmax changes; {name} test accuracy before {a} after {b}"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = seed::rng(0xF4);
    let mut rows = 0;
    let (mut low_t_min, mut high_t_dev, mut bracket_err): (f64, f64, f64) = (1.0, 0.0, 0.0);
    while rows < 200 {
        let k = rng.random_range(2..10);
        // Same spread as the [3, 1, 0] example; at t = 1e3 a logit gap g moves the
        // confidence about g/(4t) away from 1/K, so wide rows need larger t.
        let row: Vec<f64> = (0..k).map(|_| rng.random_range(-1.5..1.5)).collect();
        let mut sorted = row.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        // Distinct entries: the two largest must differ measurably.
        if sorted[0] - sorted[1] < 0.02 {
            continue;
        }
        low_t_min = low_t_min.min(confidence_at(&row, 1e-3));
        high_t_dev = high_t_dev.max((confidence_at(&row, 1e3) - 1.0 / k as f64).abs());
        let eps = 0.01;
        for target in [1.0 / k as f64 + eps, 0.5 * (1.0 / k as f64 + 1.0), 0.9_f64.max(1.0 / k as f64 + eps), 1.0 - eps] {
            let t = temperature_for_confidence(&row, target).unwrap();
            bracket_err = bracket_err.max((confidence_at(&row, t) - target).abs());
        }
        rows += 1;
    }
    check(
        low_t_min >= 0.999 && high_t_dev <= 1e-3 && bracket_err <= 1e-6,
        format!(
            "200 rows, min conf at t=1e-3 {low_t_min:.6}, max |conf-1/K| at t=1e3 {high_t_dev:.2e}, \
             max bracketing error {bracket_err:.2e}"
        ),
    )
}

/// Per-seed results of the post-hoc calibration experiment.
struct CalibrationRun {
    accuracy: f64,
    ece_before: f64,
    ece_cagcn: f64,
    ece_ts: f64,
    nll_before: f64,
    nll_cagcn: f64,
    brier_before: f64,
    brier_cagcn: f64,
    tv_before: f64,
    tv_cagcn: f64,
    under_bins: usize,
    populated_bins: usize,
}

fn calibration_run(ds: &LabeledDataset, seed_value: u64) -> CalibrationRun {
    let trained = train_classifier(
        ds,
        &TrainConfig {
            seed: seed_value,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let adj = normalize_sym(&ds.graph);
    let logits = predict_logits(&adj, &ds.features, &trained.params).unwrap();
    let before = CalibratorOutput::uncalibrated(&logits).unwrap();
    let settings = CalibrationSettings {
        cagcn: CaGcnConfig {
            seed: derive(seed_value, tag::CALIBRATOR, 0),
            ..CaGcnConfig::default()
        },
        ..CalibrationSettings::default()
    };
    let cagcn = fit_calibrator(CalibratorKind::CaGcn, &adj, &logits, &ds.labels, &ds.masks.val, &settings)
        .unwrap()
        .apply(&adj, &logits)
        .unwrap();
    let ts = fit_temperature(
        &select_rows(&logits, &ds.masks.val),
        &select(&ds.labels, &ds.masks.val),
        &TemperatureConfig::default(),
    )
    .unwrap();
    let ts_out = apply_temperature(&logits, ts.temperature).unwrap();
    let eval = |o: &CalibratorOutput| evaluate(&ds.graph, &o.probs, &ds.labels, &ds.masks.test, 20).unwrap();
    let (report, m0) = eval(&before);
    let (_, m1) = eval(&cagcn);
    let (_, m2) = eval(&ts_out);
    let (under_bins, populated_bins) = report.underconfident_bins();
    CalibrationRun {
        accuracy: m0.accuracy,
        ece_before: m0.ece,
        ece_cagcn: m1.ece,
        ece_ts: m2.ece,
        nll_before: m0.nll,
        nll_cagcn: m1.nll,
        brier_before: m0.brier,
        brier_cagcn: m1.brier,
        tv_before: m0.total_variation,
        tv_cagcn: m1.total_variation,
        under_bins,
        populated_bins,
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

struct CalibrationSummary {
    accuracy: f64,
    ece_before: f64,
    ece_cagcn: f64,
    ece_ts: f64,
    nll: (f64, f64),
    brier: (f64, f64),
    tv: (f64, f64),
    under: usize,
    populated: usize,
    seconds: f64,
}

fn calibration_summary(ds: &LabeledDataset, seeds: u64) -> CalibrationSummary {
    let start = Instant::now();
    let runs: Vec<CalibrationRun> = (0..seeds).map(|s| calibration_run(ds, s)).collect();
    CalibrationSummary {
        accuracy: mean(runs.iter().map(|r| r.accuracy)),
        ece_before: mean(runs.iter().map(|r| r.ece_before)),
        ece_cagcn: mean(runs.iter().map(|r| r.ece_cagcn)),
        ece_ts: mean(runs.iter().map(|r| r.ece_ts)),
        nll: (mean(runs.iter().map(|r| r.nll_before)), mean(runs.iter().map(|r| r.nll_cagcn))),
        brier: (mean(runs.iter().map(|r| r.brier_before)), mean(runs.iter().map(|r| r.brier_cagcn))),
        tv: (mean(runs.iter().map(|r| r.tv_before)), mean(runs.iter().map(|r| r.tv_cagcn))),
        under: runs.iter().map(|r| r.under_bins).sum(),
        populated: runs.iter().map(|r| r.populated_bins).sum(),
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn criteria_5_to_7(s: &CalibrationSummary) -> [Outcome; 3] {
    let c5 = check(
        (0.78..=0.84).contains(&s.accuracy)
            && (0.09..=0.18).contains(&s.ece_before)
            && 2 * s.under > s.populated
            && s.seconds < 300.0,
        format!(
            "Cora 10 seeds: accuracy {:.4}, ECE {:.4}, under-confident bins {}/{}, {:.0}s",
            s.accuracy, s.ece_before, s.under, s.populated, s.seconds
        ),
    );
    let c6 = check(
        s.ece_cagcn <= 0.07
            && s.ece_cagcn <= 0.6 * s.ece_before
            && (0.03..=0.08).contains(&s.ece_ts)
            && s.nll.1 <= s.nll.0
            && s.brier.1 <= s.brier.0,
        format!(
            "CaGCN ECE {:.4} (uncalibrated {:.4}), TS ECE {:.4}, NLL {:.4} -> {:.4}, Brier {:.4} -> {:.4}",
            s.ece_cagcn, s.ece_before, s.ece_ts, s.nll.0, s.nll.1, s.brier.0, s.brier.1
        ),
    );
    let reduction = 1.0 - s.tv.1 / s.tv.0;
    let c7 = check(
        s.tv.1 < s.tv.0 && reduction >= 0.10,
        format!("total variation {:.3} -> {:.3} ({:.1}% lower)", s.tv.0, s.tv.1, 100.0 * reduction),
    );
    [c5, c6, c7]
}

fn self_training_means(datasets: &[LabeledDataset], st: &SelfTrainConfig) -> (f64, f64, f64) {
    let mut gcn = Vec::new();
    let mut cagcn_st = Vec::new();
    let mut gcn_st = Vec::new();
    for (s, ds) in datasets.iter().enumerate() {
        let s = s as u64;
        let plain = train_classifier(
            ds,
            &TrainConfig {
                seed: s,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let adj = normalize_sym(&ds.graph);
        let logits = predict_logits(&adj, &ds.features, &plain.params).unwrap();
        gcn.push(graphcal::nn::accuracy(&logits.argmax_rows(), &ds.labels, &ds.masks.test));
        let config = SelfTrainConfig { seed: s, ..st.clone() };
        cagcn_st.push(run_self_training(ds, &config).unwrap().final_test_accuracy());
        let none = SelfTrainConfig {
            calibrator: CalibratorKind::None,
            ..config
        };
        gcn_st.push(run_self_training(ds, &none).unwrap().final_test_accuracy());
    }
    (mean(gcn.into_iter()), mean(cagcn_st.into_iter()), mean(gcn_st.into_iter()))
}

fn criterion_8(cora: Option<&LabeledDataset>) -> Outcome {
    let start = Instant::now();
    let st = SelfTrainConfig {
        threshold: 0.8,
        max_stages: 4,
        ..SelfTrainConfig::default()
    };
    match cora {
        Some(ds) => {
            let datasets = vec![ds.clone(); 10];
            let (gcn, cagcn_st, gcn_st) = self_training_means(&datasets, &st);
            let secs = start.elapsed().as_secs_f64();
            check(
                cagcn_st >= gcn + 0.005 && cagcn_st > gcn_st && secs < 1200.0,
                format!("Cora 10 seeds: GCN {gcn:.4}, CaGCN-st {cagcn_st:.4}, GCN-st {gcn_st:.4}, {secs:.0}s"),
            )
        }
        None => {
            let datasets: Vec<_> = (0..5).map(sbm_dataset).collect();
            let (gcn, cagcn_st, gcn_st) = self_training_means(&datasets, &st);
            check(
                cagcn_st >= gcn,
                format!(
                    "SBM stand-in (Cora not provisioned), 5 seeds: GCN {gcn:.4}, CaGCN-st {cagcn_st:.4} \
                     (GCN-st {gcn_st:.4}, info), {:.0}s",
                    start.elapsed().as_secs_f64()
                ),
            )
        }
    }
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn graphcal(args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_graphcal"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(format!("graphcal {} failed: {}", args.join(" "), String::from_utf8_lossy(&status.stderr)))
    }
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let p = |s: &str| root.join(s).to_string_lossy().into_owned();
    let run = |tag: &str, threads: &str| -> Result<(), String> {
        let data = p(&format!("{tag}/sbm"));
        graphcal(&["gen-sbm", "--out", &data, "--nodes", "300", "--val-size", "60", "--test-size", "120", "--seed", "4"])?;
        let train = p(&format!("{tag}/train"));
        graphcal(&["train", "--dataset", &data, "--raw-features", "--seeds", "3", "--seed", "7", "--threads", threads, "--out", &train])?;
        graphcal(&["calibrate", "--dataset", &data, "--checkpoint", &train, "--calibrator", "cagcn", "--out", &p(&format!("{tag}/cal"))])?;
        graphcal(&[
            "calibrate", "--dataset", &data, "--logits", &format!("{train}/seed_7/logits.csv"), "--raw-features",
            "--calibrator", "matrix", "--out", &p(&format!("{tag}/ms")),
        ])?;
        graphcal(&[
            "selftrain", "--dataset", &data, "--raw-features", "--seeds", "2", "--stages", "3", "--cal-epochs", "50",
            "--threads", threads, "--out", &p(&format!("{tag}/st")),
        ])?;
        graphcal(&[
            "report", "--predictions", &p(&format!("{tag}/cal/seed_7/calibrated.csv")), "--dataset", &data,
            "--out", &p(&format!("{tag}/report")),
        ])
    };
    for (tag, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        if let Err(e) = run(tag, threads) {
            return Outcome::Fail(e);
        }
    }
    let reference = files_under(&root.join("a"));
    let mut differing = Vec::new();
    for other in ["b", "c"] {
        if files_under(&root.join(other)) != reference {
            differing.push(format!("{other}: file sets differ"));
            continue;
        }
        for f in &reference {
            if fs::read(root.join("a").join(f)).unwrap() != fs::read(root.join(other).join(f)).unwrap() {
                differing.push(format!("{other}/{}", f.display()));
            }
        }
    }
    check(
        differing.is_empty(),
        format!(
            "{} output files from gen-sbm/train/calibrate/selftrain/report identical across 2 sequential runs \
             and a 3-thread run{}",
            reference.len(),
            if differing.is_empty() { String::new() } else { format!("; differing: {differing:?}") }
        ),
    )
}

fn cora_dir() -> PathBuf {
    std::env::var_os("CAGCN_CORA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/cora"))
}

fn main() {
    let dir = cora_dir();
    let cora = if dir.join("labels.csv").exists() {
        let options = LoadOptions {
            split: Some((SplitSpec::default(), derive(0, tag::SPLIT, 0))),
            ..LoadOptions::default()
        };
        match load_dataset(&dir, &options) {
            Ok(ds) => Some(ds),
            Err(e) => {
                eprintln!("cannot load Cora from {}: {e}", dir.display());
                std::process::exit(1);
            }
        }
    } else {
        None
    };

    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "finite-difference gradients", criterion_1()),
        (2, "metric oracles", criterion_2()),
        (3, "accuracy preservation", criterion_3(cora.as_ref())),
        (4, "confidence traversal", criterion_4()),
    ];
    match &cora {
        Some(ds) => {
            let summary = calibration_summary(ds, 10);
            let [c5, c6, c7] = criteria_5_to_7(&summary);
            results.push((5, "under-confidence on Cora", c5));
            results.push((6, "calibration gain on Cora", c6));
            results.push((7, "total variation on Cora", c7));
        }
        None => {
            let blocked = format!("Cora not provisioned at {} (set CAGCN_CORA_DIR)", dir.display());
            let proxy = calibration_summary(&sbm_dataset(0), 5);
            let diag = format!(
                "; SBM diagnostic: accuracy {:.4}, ECE {:.4} -> CaGCN {:.4} / TS {:.4}, \
                 under-confident bins {}/{}, TV {:.2} -> {:.2}",
                proxy.accuracy,
                proxy.ece_before,
                proxy.ece_cagcn,
                proxy.ece_ts,
                proxy.under,
                proxy.populated,
                proxy.tv.0,
                proxy.tv.1
            );
            results.push((5, "under-confidence on Cora", Outcome::Blocked(format!("{blocked}{diag}"))));
            results.push((6, "calibration gain on Cora", Outcome::Blocked(blocked.clone())));
            results.push((7, "total variation on Cora", Outcome::Blocked(blocked)));
        }
    }
    results.push((8, "self-training gain", criterion_8(cora.as_ref())));
    results.push((9, "CLI determinism", criterion_9()));

    let mut failed = 0;
    for (id, name, outcome) in &results {
        let (status, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Blocked(d) => ("BLOCKED", d),
        };
        println!("criterion {id} [{status}] {name}: {detail}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

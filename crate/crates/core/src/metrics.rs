//! Calibration and accuracy metrics.
//!
//! Confidence bins are equal-width on `[0, 1]` with half-open intervals
//! `(m-1)/M < p <= m/M`; the first bin also takes `p = 0`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::nn::{nll_loss, DenseMatrix};

/// Default bin count for ECE and reliability diagrams.
pub const DEFAULT_BINS: usize = 20;

fn bin_edge(m: usize, num_bins: usize) -> f64 {
    m as f64 / num_bins as f64
}

/// Zero-based bin of confidence `p`.
pub fn bin_index(p: f64, num_bins: usize) -> usize {
    let mut b = ((p * num_bins as f64).ceil() as usize).clamp(1, num_bins);
    // ceil(p·M) can land one bin off the m/M edges through rounding
    while b > 1 && p <= bin_edge(b - 1, num_bins) {
        b -= 1;
    }
    while b < num_bins && p > bin_edge(b, num_bins) {
        b += 1;
    }
    b - 1
}

fn check_inputs(confidence: &[f64], correct: &[bool], num_bins: usize) -> Result<()> {
    if num_bins == 0 {
        return Err(Error::input("number of bins must be positive"));
    }
    if confidence.is_empty() {
        return Err(Error::input("no nodes to evaluate"));
    }
    if confidence.len() != correct.len() {
        return Err(Error::shape("calibration metric", confidence.len(), correct.len()));
    }
    if let Some(p) = confidence.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::input(format!("confidence {p} outside [0, 1]")));
    }
    Ok(())
}

struct Bins {
    count: Vec<usize>,
    conf_sum: Vec<f64>,
    hits: Vec<usize>,
}

fn accumulate(confidence: &[f64], correct: &[bool], num_bins: usize) -> Bins {
    let mut bins = Bins {
        count: vec![0; num_bins],
        conf_sum: vec![0.0; num_bins],
        hits: vec![0; num_bins],
    };
    for (&p, &ok) in confidence.iter().zip(correct) {
        let b = bin_index(p, num_bins);
        bins.count[b] += 1;
        bins.conf_sum[b] += p;
        bins.hits[b] += usize::from(ok);
    }
    bins
}

impl Bins {
    fn mean_conf(&self, b: usize) -> f64 {
        if self.count[b] == 0 {
            0.0
        } else {
            self.conf_sum[b] / self.count[b] as f64
        }
    }

    fn mean_acc(&self, b: usize) -> f64 {
        if self.count[b] == 0 {
            0.0
        } else {
            self.hits[b] as f64 / self.count[b] as f64
        }
    }

    fn ece(&self, total: usize) -> f64 {
        (0..self.count.len())
            .filter(|&b| self.count[b] > 0)
            .map(|b| self.count[b] as f64 / total as f64 * (self.mean_acc(b) - self.mean_conf(b)).abs())
            .sum()
    }
}

/// Expected calibration error over `num_bins` equal-width bins.
pub fn ece(confidence: &[f64], correct: &[bool], num_bins: usize) -> Result<f64> {
    check_inputs(confidence, correct, num_bins)?;
    Ok(accumulate(confidence, correct, num_bins).ece(confidence.len()))
}

fn check_probs(probs: &DenseMatrix, labels: &[usize]) -> Result<()> {
    if probs.rows() != labels.len() {
        return Err(Error::shape("brier", probs.rows(), labels.len()));
    }
    if let Some(i) = labels.iter().position(|&y| y >= probs.cols()) {
        return Err(Error::input(format!("label {} of row {i} outside [0, {})", labels[i], probs.cols())));
    }
    Ok(())
}

/// Multi-class Brier score `(1/N) Σ_i Σ_k (z_ik − y_ik)²`.
pub fn brier(probs: &DenseMatrix, labels: &[usize]) -> Result<f64> {
    check_probs(probs, labels)?;
    if labels.is_empty() {
        return Err(Error::input("no nodes to evaluate"));
    }
    let mut total = 0.0;
    for (row, &y) in probs.iter_rows().zip(labels) {
        for (k, &z) in row.iter().enumerate() {
            let target = if k == y { 1.0 } else { 0.0 };
            total += (z - target) * (z - target);
        }
    }
    Ok(total / labels.len() as f64)
}

/// `Σ |p_i − p_j|` over undirected edges `{i, j}`, each counted once;
/// self-loops are ignored.
pub fn total_variation(graph: &SparseGraph, confidence: &[f64]) -> Result<f64> {
    if confidence.len() != graph.num_nodes() {
        return Err(Error::shape("total_variation", graph.num_nodes(), confidence.len()));
    }
    Ok(graph
        .undirected_edges()
        .map(|(i, j)| (confidence[i] - confidence[j]).abs())
        .sum())
}

/// Per-bin reliability statistics plus scalar metrics for one set of nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityReport {
    pub num_bins: usize,
    pub bin_edges: Vec<f64>,
    pub bin_count: Vec<usize>,
    pub bin_conf: Vec<f64>,
    pub bin_acc: Vec<f64>,
    pub ece: f64,
    /// Mean negative log-likelihood.
    pub nll: f64,
    pub brier: f64,
    pub accuracy: f64,
}

/// Max probability and argmax per row.
pub fn confidence_and_prediction(probs: &DenseMatrix) -> (Vec<f64>, Vec<usize>) {
    probs
        .iter_rows()
        .map(|row| {
            let k = crate::nn::argmax(row);
            (row[k], k)
        })
        .unzip()
}

pub fn reliability_report(probs: &DenseMatrix, labels: &[usize], num_bins: usize) -> Result<ReliabilityReport> {
    check_probs(probs, labels)?;
    let (confidence, prediction) = confidence_and_prediction(probs);
    let correct: Vec<bool> = prediction.iter().zip(labels).map(|(p, y)| p == y).collect();
    check_inputs(&confidence, &correct, num_bins)?;
    let bins = accumulate(&confidence, &correct, num_bins);
    let n = labels.len();
    let nll = nll_loss(probs, labels, &vec![true; n])?;
    Ok(ReliabilityReport {
        num_bins,
        bin_edges: (0..=num_bins).map(|m| bin_edge(m, num_bins)).collect(),
        bin_count: bins.count.clone(),
        bin_conf: (0..num_bins).map(|b| bins.mean_conf(b)).collect(),
        bin_acc: (0..num_bins).map(|b| bins.mean_acc(b)).collect(),
        ece: bins.ece(n),
        nll: nll.mean(),
        brier: brier(probs, labels)?,
        accuracy: bins.hits.iter().sum::<usize>() as f64 / n as f64,
    })
}

impl ReliabilityReport {
    pub const CSV_HEADER: &'static str = "bin,lower,upper,count,mean_confidence,mean_accuracy";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for b in 0..self.num_bins {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                b + 1,
                self.bin_edges[b],
                self.bin_edges[b + 1],
                self.bin_count[b],
                self.bin_conf[b],
                self.bin_acc[b]
            )
            .unwrap();
        }
        out
    }

    /// Populated bins where accuracy exceeds confidence, and populated bins.
    pub fn underconfident_bins(&self) -> (usize, usize) {
        let populated = (0..self.num_bins).filter(|&b| self.bin_count[b] > 0);
        populated.fold((0, 0), |(under, all), b| {
            (under + usize::from(self.bin_acc[b] > self.bin_conf[b]), all + 1)
        })
    }
}

/// Counts of correct and incorrect predictions per confidence bin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfidenceHistogram {
    pub num_bins: usize,
    pub correct: Vec<usize>,
    pub incorrect: Vec<usize>,
}

pub fn confidence_histogram(confidence: &[f64], correct: &[bool], num_bins: usize) -> Result<ConfidenceHistogram> {
    check_inputs(confidence, correct, num_bins)?;
    let mut hist = ConfidenceHistogram {
        num_bins,
        correct: vec![0; num_bins],
        incorrect: vec![0; num_bins],
    };
    for (&p, &ok) in confidence.iter().zip(correct) {
        let b = bin_index(p, num_bins);
        if ok {
            hist.correct[b] += 1;
        } else {
            hist.incorrect[b] += 1;
        }
    }
    Ok(hist)
}

impl ConfidenceHistogram {
    pub const CSV_HEADER: &'static str = "bin,lower,upper,correct,incorrect";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for b in 0..self.num_bins {
            writeln!(
                out,
                "{},{},{},{},{}",
                b + 1,
                bin_edge(b, self.num_bins),
                bin_edge(b + 1, self.num_bins),
                self.correct[b],
                self.incorrect[b]
            )
            .unwrap();
        }
        out
    }
}

/// Scalar metrics of one evaluation, exportable as `key=value` text or JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarMetrics {
    pub nodes: usize,
    pub accuracy: f64,
    pub ece: f64,
    pub nll: f64,
    pub brier: f64,
    pub total_variation: f64,
}

impl ScalarMetrics {
    pub fn to_key_values(&self, prefix: &str) -> String {
        let mut out = String::new();
        writeln!(out, "{prefix}nodes={}", self.nodes).unwrap();
        writeln!(out, "{prefix}accuracy={}", self.accuracy).unwrap();
        writeln!(out, "{prefix}ece={}", self.ece).unwrap();
        writeln!(out, "{prefix}nll={}", self.nll).unwrap();
        writeln!(out, "{prefix}brier={}", self.brier).unwrap();
        writeln!(out, "{prefix}total_variation={}", self.total_variation).unwrap();
        out
    }
}

/// Rows of `m` selected by `mask`, in order.
pub fn select_rows(m: &DenseMatrix, mask: &[bool]) -> DenseMatrix {
    let rows: Vec<usize> = (0..m.rows()).filter(|&i| mask[i]).collect();
    let mut out = DenseMatrix::zeros(rows.len(), m.cols());
    for (r, &i) in rows.iter().enumerate() {
        out.row_mut(r).copy_from_slice(m.row(i));
    }
    out
}

pub fn select<T: Copy>(values: &[T], mask: &[bool]) -> Vec<T> {
    values.iter().zip(mask).filter(|(_, &m)| m).map(|(&v, _)| v).collect()
}

/// Report on the `mask` rows plus total variation over the whole graph.
pub fn evaluate(
    graph: &SparseGraph,
    probs: &DenseMatrix,
    labels: &[usize],
    mask: &[bool],
    num_bins: usize,
) -> Result<(ReliabilityReport, ScalarMetrics)> {
    let sub = select_rows(probs, mask);
    let sub_labels = select(labels, mask);
    let report = reliability_report(&sub, &sub_labels, num_bins)?;
    let (confidence, _) = confidence_and_prediction(probs);
    let metrics = ScalarMetrics {
        nodes: sub_labels.len(),
        accuracy: report.accuracy,
        ece: report.ece,
        nll: report.nll,
        brier: report.brier,
        total_variation: total_variation(graph, &confidence)?,
    };
    Ok((report, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_csr, EdgeList};

    #[test]
    fn ece_hand_examples() {
        let v = ece(&[0.95, 0.85, 0.65, 0.55], &[true, true, false, true], 20).unwrap();
        assert!((v - 0.325).abs() < 1e-12, "{v}");
        let one = ece(&[0.7], &[true], 20).unwrap();
        assert!((one - 0.3).abs() < 1e-12);
    }

    #[test]
    fn perfect_calibration_has_zero_ece() {
        // bin (0.7, 0.75]: 4 nodes at 0.75 with 3 correct
        let conf = [0.75, 0.75, 0.75, 0.75, 0.5, 0.5];
        let correct = [true, true, true, false, true, false];
        assert_eq!(ece(&conf, &correct, 20).unwrap(), 0.0);
    }

    #[test]
    fn bin_boundaries() {
        assert_eq!(bin_index(0.0, 20), 0);
        assert_eq!(bin_index(0.05, 20), 0);
        assert_eq!(bin_index(0.0500001, 20), 1);
        assert_eq!(bin_index(1.0, 20), 19);
        assert_eq!(bin_index(0.15, 20), 2);
        assert_eq!(bin_index(0.3, 10), 2);
        for m in 1..=50 {
            for b in 0..=m {
                let edge = b as f64 / m as f64;
                let idx = bin_index(edge, m);
                assert_eq!(idx, b.saturating_sub(1), "edge {b}/{m}");
            }
        }
    }

    #[test]
    fn ece_input_errors() {
        assert!(matches!(ece(&[], &[], 20), Err(Error::Input(_))));
        assert!(matches!(ece(&[0.5], &[true], 0), Err(Error::Input(_))));
        assert!(matches!(ece(&[1.5], &[true], 10), Err(Error::Input(_))));
    }

    #[test]
    fn brier_closed_forms() {
        let onehot = DenseMatrix::from_vec(2, 3, vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(brier(&onehot, &[1, 0]).unwrap(), 0.0);
        let half = DenseMatrix::from_vec(1, 2, vec![0.5, 0.5]).unwrap();
        assert_eq!(brier(&half, &[0]).unwrap(), 0.5);
        for k in 2..9usize {
            let uniform = DenseMatrix::from_vec(1, k, vec![1.0 / k as f64; k]).unwrap();
            let kf = k as f64;
            let expected = (1.0 - 1.0 / kf).powi(2) + (kf - 1.0) / (kf * kf);
            assert!((brier(&uniform, &[k - 1]).unwrap() - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn total_variation_examples() {
        let path = build_csr(&EdgeList::new(vec![(0, 1), (1, 2)]), 3).unwrap();
        assert!((total_variation(&path, &[0.9, 0.5, 0.7]).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(total_variation(&path, &[0.4; 3]).unwrap(), 0.0);
        let empty = build_csr(&EdgeList::default(), 3).unwrap();
        assert_eq!(total_variation(&empty, &[0.1, 0.9, 0.3]).unwrap(), 0.0);
        let normalized = crate::graph::normalize_sym(&path);
        assert_eq!(
            total_variation(&normalized, &[0.9, 0.5, 0.7]).unwrap(),
            total_variation(&path, &[0.9, 0.5, 0.7]).unwrap()
        );
    }

    #[test]
    fn report_is_consistent_with_ece() {
        let probs = DenseMatrix::from_vec(
            4,
            2,
            vec![0.9, 0.1, 0.3, 0.7, 0.55, 0.45, 0.2, 0.8],
        )
        .unwrap();
        let labels = [0, 0, 1, 1];
        let r = reliability_report(&probs, &labels, 10).unwrap();
        let (conf, pred) = confidence_and_prediction(&probs);
        let correct: Vec<bool> = pred.iter().zip(&labels).map(|(p, y)| p == y).collect();
        assert_eq!(r.ece.to_bits(), ece(&conf, &correct, 10).unwrap().to_bits());
        assert_eq!(r.bin_count.iter().sum::<usize>(), 4);
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.bin_edges.len(), 11);
        let recomputed: f64 = (0..10)
            .filter(|&b| r.bin_count[b] > 0)
            .map(|b| r.bin_count[b] as f64 / 4.0 * (r.bin_acc[b] - r.bin_conf[b]).abs())
            .sum();
        assert_eq!(recomputed, r.ece);
        assert_eq!(r.to_csv().lines().count(), 11);
    }

    #[test]
    fn histogram_counts() {
        let h = confidence_histogram(&[0.1, 0.12, 0.9, 0.95, 0.96], &[true, false, true, true, false], 10).unwrap();
        assert_eq!(h.correct, vec![1, 0, 0, 0, 0, 0, 0, 0, 1, 1]);
        assert_eq!(h.incorrect, vec![0, 1, 0, 0, 0, 0, 0, 0, 0, 1]);
        let all = confidence_histogram(&[0.3; 5], &[true; 5], 4).unwrap();
        assert!(all.incorrect.iter().all(|&c| c == 0));
        assert_eq!(all.correct[1], 5);
    }
}

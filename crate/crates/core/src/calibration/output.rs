use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io;
use crate::nn::{argmax, softmax_rows, DenseMatrix};

/// Result of applying a calibrator to a logit matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratorOutput {
    pub calibrated_logits: DenseMatrix,
    /// Per-node temperature; all ones for calibrators without one.
    pub temperatures: Vec<f64>,
    pub probs: DenseMatrix,
    pub confidence: Vec<f64>,
    pub prediction: Vec<usize>,
}

impl CalibratorOutput {
    pub fn from_calibrated(calibrated_logits: DenseMatrix, temperatures: Vec<f64>) -> Result<Self> {
        if temperatures.len() != calibrated_logits.rows() {
            return Err(Error::shape(
                "CalibratorOutput",
                calibrated_logits.rows(),
                temperatures.len(),
            ));
        }
        if !calibrated_logits.all_finite() {
            return Err(Error::Numerical("calibrated logits are not finite".into()));
        }
        let probs = softmax_rows(&calibrated_logits);
        let (confidence, prediction) = probs
            .iter_rows()
            .map(|row| {
                let k = argmax(row);
                (row[k], k)
            })
            .unzip();
        Ok(Self {
            calibrated_logits,
            temperatures,
            probs,
            confidence,
            prediction,
        })
    }

    /// Plain softmax of uncalibrated logits.
    pub fn uncalibrated(logits: &DenseMatrix) -> Result<Self> {
        Self::from_calibrated(logits.clone(), vec![1.0; logits.rows()])
    }

    pub fn num_nodes(&self) -> usize {
        self.prediction.len()
    }

    /// Correctness of each prediction against `labels`.
    pub fn correct(&self, labels: &[usize]) -> Vec<bool> {
        self.prediction.iter().zip(labels).map(|(p, y)| p == y).collect()
    }

    /// `node_id,l0,…,l{K-1},temperature,confidence`, with calibrated logits.
    pub fn to_csv(&self) -> String {
        let k = self.calibrated_logits.cols();
        let mut out = logits_header(k);
        out.push_str(",temperature,confidence\n");
        for i in 0..self.num_nodes() {
            write!(out, "{i}").unwrap();
            for v in self.calibrated_logits.row(i) {
                write!(out, ",{v}").unwrap();
            }
            writeln!(out, ",{},{}", self.temperatures[i], self.confidence[i]).unwrap();
        }
        out
    }

    /// Reads a file written by [`CalibratorOutput::to_csv`]. Probabilities
    /// and predictions are recomputed from the stored logits.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let table = read_node_csv(path)?;
        let k = table.header.iter().filter(|h| is_logit_column(h)).count();
        let expected: Vec<String> = std::iter::once("node_id".to_string())
            .chain((0..k).map(|c| format!("l{c}")))
            .chain(["temperature".to_string(), "confidence".to_string()])
            .collect();
        if table.header != expected || k == 0 {
            return Err(io::parse_error(
                path,
                table.header_line,
                "expected header node_id,l0,…,l{K-1},temperature,confidence",
            ));
        }
        let mut logits = DenseMatrix::zeros(table.rows.len(), k);
        let mut temperatures = vec![0.0; table.rows.len()];
        for (i, row) in table.rows.iter().enumerate() {
            logits.row_mut(i).copy_from_slice(&row[..k]);
            temperatures[i] = row[k];
        }
        Self::from_calibrated(logits, temperatures)
    }
}

fn is_logit_column(name: &str) -> bool {
    name.strip_prefix('l').is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
}

fn logits_header(k: usize) -> String {
    let mut out = String::from("node_id");
    for c in 0..k {
        write!(out, ",l{c}").unwrap();
    }
    out
}

struct NodeTable {
    header: Vec<String>,
    header_line: usize,
    /// Values per node id, excluding the id column.
    rows: Vec<Vec<f64>>,
}

fn read_node_csv(path: &Path) -> Result<NodeTable> {
    let records = io::read_records(path)?;
    let (head, body) = records
        .split_first()
        .ok_or_else(|| io::parse_error(path, 1, "file is empty"))?;
    let width = head.fields.len();
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; body.len()];
    for rec in body {
        if rec.fields.len() != width {
            return Err(io::parse_error(
                path,
                rec.line,
                format!("expected {width} columns, found {}", rec.fields.len()),
            ));
        }
        let id: usize = io::field(path, rec, 0, "node_id")?;
        if id >= body.len() {
            return Err(io::parse_error(path, rec.line, format!("node id {id} outside [0, {})", body.len())));
        }
        let values = (1..width)
            .map(|c| io::finite_field(path, rec, c, "value"))
            .collect::<Result<Vec<_>>>()?;
        if rows[id].replace(values).is_some() {
            return Err(io::parse_error(path, rec.line, format!("duplicate node id {id}")));
        }
    }
    Ok(NodeTable {
        header: head.fields.clone(),
        header_line: head.line,
        rows: rows.into_iter().map(|r| r.expect("ids are a permutation")).collect(),
    })
}

/// Writes logits as `node_id,l0,…,l{K-1}`.
pub fn logits_to_csv(logits: &DenseMatrix) -> String {
    let mut out = logits_header(logits.cols());
    out.push('\n');
    for i in 0..logits.rows() {
        write!(out, "{i}").unwrap();
        for v in logits.row(i) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Reads logits written by any model in the `node_id,l0,…` layout. Node ids
/// must cover `0..N` exactly once, in any order.
pub fn read_logits_csv(path: &Path) -> Result<DenseMatrix> {
    let table = read_node_csv(path)?;
    let k = table.header.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("node_id".to_string())
        .chain((0..k).map(|c| format!("l{c}")))
        .collect();
    if table.header != expected || k == 0 {
        return Err(io::parse_error(path, table.header_line, "expected header node_id,l0,…,l{K-1}"));
    }
    let n = table.rows.len();
    DenseMatrix::from_vec(n, k, table.rows.into_iter().flatten().collect())
}

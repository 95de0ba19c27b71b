//! Single-temperature scaling.

use super::output::CalibratorOutput;
use crate::error::{Error, Result};
use crate::nn::{argmax, softmax_in_place, DenseMatrix, LOG_CLAMP};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Search interval for the bounded fallback.
    pub min_temperature: f64,
    pub max_temperature: f64,
    /// Gradient magnitude below which the descent path counts as converged.
    pub gradient_tolerance: f64,
}

impl Default for TemperatureConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            max_iterations: 50,
            min_temperature: 0.05,
            max_temperature: 20.0,
            gradient_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemperatureMethod {
    GradientDescent,
    GoldenSection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureFit {
    pub temperature: f64,
    /// Mean NLL of `softmax(V / t)` at the returned temperature.
    pub nll: f64,
    pub method: TemperatureMethod,
}

/// Mean NLL of `softmax(logits / t)` and its derivative in `t`.
pub fn temperature_nll(logits: &DenseMatrix, labels: &[usize], t: f64) -> (f64, f64) {
    let n = logits.rows();
    let mut loss = 0.0;
    let mut grad = 0.0;
    let mut z = vec![0.0; logits.cols()];
    for (row, &y) in logits.iter_rows().zip(labels) {
        for (zk, &v) in z.iter_mut().zip(row) {
            *zk = v / t;
        }
        softmax_in_place(&mut z);
        loss -= z[y].max(LOG_CLAMP).ln();
        let expected: f64 = z.iter().zip(row).map(|(p, v)| p * v).sum();
        grad += (row[y] - expected) / (t * t);
    }
    (loss / n as f64, grad / n as f64)
}

pub(crate) fn check_fit_inputs(logits: &DenseMatrix, labels: &[usize]) -> Result<()> {
    if logits.rows() == 0 {
        return Err(Error::input("no nodes to fit the calibrator on"));
    }
    if logits.rows() != labels.len() {
        return Err(Error::shape("calibrator fit", logits.rows(), labels.len()));
    }
    if let Some(y) = labels.iter().find(|&&y| y >= logits.cols()) {
        return Err(Error::input(format!("label {y} outside [0, {})", logits.cols())));
    }
    if !logits.all_finite() {
        return Err(Error::input("logits contain non-finite values"));
    }
    Ok(())
}


/// Fits one temperature minimizing the mean NLL of `softmax(V / t)`.
///
/// Runs gradient descent from `t = 1`; if it has not converged within the
/// iteration budget (or leaves the search interval), falls back to a
/// golden-section search over `ln t` on the configured interval. The NLL is
/// convex in `1/t`, so it is unimodal in `ln t`.
pub fn fit_temperature(logits: &DenseMatrix, labels: &[usize], config: &TemperatureConfig) -> Result<TemperatureFit> {
    check_fit_inputs(logits, labels)?;
    let (lo, hi) = (config.min_temperature, config.max_temperature);
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::input("temperature search interval must satisfy 0 < min < max"));
    }

    let mut t = 1.0;
    let mut converged = false;
    for _ in 0..config.max_iterations {
        let (_, grad) = temperature_nll(logits, labels, t);
        if grad.abs() <= config.gradient_tolerance {
            converged = true;
            break;
        }
        t -= config.learning_rate * grad;
        if !(lo..=hi).contains(&t) {
            break;
        }
    }
    if !converged && (lo..=hi).contains(&t) {
        converged = temperature_nll(logits, labels, t).1.abs() <= config.gradient_tolerance;
    }
    if converged {
        return Ok(TemperatureFit {
            temperature: t,
            nll: temperature_nll(logits, labels, t).0,
            method: TemperatureMethod::GradientDescent,
        });
    }

    let f = |u: f64| temperature_nll(logits, labels, u.exp()).0;
    let u = golden_section_min(f, lo.ln(), hi.ln(), 1e-10);
    let t = u.exp();
    Ok(TemperatureFit {
        temperature: t,
        nll: temperature_nll(logits, labels, t).0,
        method: TemperatureMethod::GoldenSection,
    })
}

/// Minimizer of a unimodal `f` on `[a, b]`.
pub(crate) fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // endpoints win when the optimum sits on the boundary
    [a, mid, b]
        .into_iter()
        .min_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap()
}

/// Divides every logit by `t`.
pub fn apply_temperature(logits: &DenseMatrix, t: f64) -> Result<CalibratorOutput> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::input(format!("temperature must be positive and finite, got {t}")));
    }
    CalibratorOutput::from_calibrated(logits.map(|v| v / t), vec![t; logits.rows()])
}

/// Confidence `max_k softmax(v / t)_k` of a single logit row.
pub fn confidence_at(row: &[f64], t: f64) -> f64 {
    let mut z: Vec<f64> = row.iter().map(|v| v / t).collect();
    softmax_in_place(&mut z);
    z[argmax(&z)]
}

/// Temperature at which `row` reaches confidence `target`, by bisection on
/// `ln t`. Confidence falls monotonically from 1 (t → 0) to 1/K (t → ∞)
/// when the row's maximum is unique.
pub fn temperature_for_confidence(row: &[f64], target: f64) -> Result<f64> {
    let k = row.len() as f64;
    if !(target > 1.0 / k && target < 1.0) {
        return Err(Error::input(format!("target confidence {target} outside (1/K, 1)")));
    }
    let (mut lo, mut hi) = (-60.0f64, 60.0f64);
    if confidence_at(row, lo.exp()) < target || confidence_at(row, hi.exp()) > target {
        return Err(Error::input("target confidence is not bracketed for this row"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if confidence_at(row, mid.exp()) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

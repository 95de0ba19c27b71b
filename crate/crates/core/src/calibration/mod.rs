//! Post-hoc calibrators: temperature scaling, matrix scaling with ODIR, and
//! CaGCN.

mod cagcn;
mod matrix_scaling;
mod output;
mod temperature;

use std::fmt;
use std::str::FromStr;

pub use cagcn::{
    cagcn_forward, cagcn_objective, cal_regularizer, softplus, train_cagcn, CaGcnConfig, CaGcnFit, CaGcnLoss,
    CaGcnParams,
};
pub use matrix_scaling::{
    fit_matrix_scaling, matrix_scaling_objective, MatrixScaling, MatrixScalingConfig, MatrixScalingFit,
};
pub use output::{logits_to_csv, read_logits_csv, CalibratorOutput};
pub use temperature::{
    apply_temperature, confidence_at, fit_temperature, temperature_for_confidence, temperature_nll,
    TemperatureConfig, TemperatureFit, TemperatureMethod,
};

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::metrics::{select, select_rows};
use crate::nn::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CalibratorKind {
    #[default]
    None,
    Temperature,
    Matrix,
    CaGcn,
}

impl CalibratorKind {
    pub const ALL: [CalibratorKind; 4] = [Self::None, Self::Temperature, Self::Matrix, Self::CaGcn];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Temperature => "temperature",
            Self::Matrix => "matrix",
            Self::CaGcn => "cagcn",
        }
    }

    /// Whether predictions are guaranteed to match the uncalibrated argmax.
    pub fn preserves_accuracy(self) -> bool {
        !matches!(self, Self::Matrix)
    }
}

impl fmt::Display for CalibratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CalibratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::input(format!("unknown calibrator {s:?}; expected none, temperature, matrix or cagcn")))
    }
}

/// Settings for every calibrator; only the chosen one is read.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CalibrationSettings {
    pub temperature: TemperatureConfig,
    pub matrix: MatrixScalingConfig,
    pub cagcn: CaGcnConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedCalibrator {
    None,
    Temperature(TemperatureFit),
    Matrix(MatrixScaling),
    CaGcn(CaGcnParams),
}

impl FittedCalibrator {
    pub fn kind(&self) -> CalibratorKind {
        match self {
            Self::None => CalibratorKind::None,
            Self::Temperature(_) => CalibratorKind::Temperature,
            Self::Matrix(_) => CalibratorKind::Matrix,
            Self::CaGcn(_) => CalibratorKind::CaGcn,
        }
    }

    /// Calibrates every row of `logits`. `adj` is only read by CaGCN.
    pub fn apply(&self, adj: &SparseGraph, logits: &DenseMatrix) -> Result<CalibratorOutput> {
        match self {
            Self::None => CalibratorOutput::uncalibrated(logits),
            Self::Temperature(fit) => apply_temperature(logits, fit.temperature),
            Self::Matrix(model) => model.apply(logits),
            Self::CaGcn(params) => cagcn_forward(adj, logits, params),
        }
    }
}

/// Fits `kind` on the rows selected by `fit_mask`.
pub fn fit_calibrator(
    kind: CalibratorKind,
    adj: &SparseGraph,
    logits: &DenseMatrix,
    labels: &[usize],
    fit_mask: &[bool],
    settings: &CalibrationSettings,
) -> Result<FittedCalibrator> {
    if fit_mask.len() != logits.rows() || labels.len() != logits.rows() {
        return Err(Error::shape("fit_calibrator", logits.rows(), fit_mask.len().min(labels.len())));
    }
    Ok(match kind {
        CalibratorKind::None => FittedCalibrator::None,
        CalibratorKind::Temperature => FittedCalibrator::Temperature(fit_temperature(
            &select_rows(logits, fit_mask),
            &select(labels, fit_mask),
            &settings.temperature,
        )?),
        CalibratorKind::Matrix => FittedCalibrator::Matrix(
            fit_matrix_scaling(&select_rows(logits, fit_mask), &select(labels, fit_mask), &settings.matrix)?.model,
        ),
        CalibratorKind::CaGcn => {
            FittedCalibrator::CaGcn(train_cagcn(adj, logits, labels, fit_mask, None, &settings.cagcn)?.params)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for kind in CalibratorKind::ALL {
            assert_eq!(kind.name().parse::<CalibratorKind>().unwrap(), kind);
        }
        assert!("platt".parse::<CalibratorKind>().is_err());
    }

    #[test]
    fn none_is_passthrough() {
        let logits = DenseMatrix::from_vec(2, 2, vec![1.0, 0.0, -1.0, 3.0]).unwrap();
        let adj = SparseGraph::identity(2);
        let fit = fit_calibrator(
            CalibratorKind::None,
            &adj,
            &logits,
            &[0, 1],
            &[true, true],
            &CalibrationSettings::default(),
        )
        .unwrap();
        assert_eq!(fit.apply(&adj, &logits).unwrap(), CalibratorOutput::uncalibrated(&logits).unwrap());
    }
}

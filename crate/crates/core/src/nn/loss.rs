use super::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Probabilities below this are clamped before taking the log.
pub const LOG_CLAMP: f64 = 1e-12;

/// Masked negative log-likelihood, unreduced, with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllLoss {
    /// `−Σ log p[i, y_i]` over masked nodes.
    pub total: f64,
    /// Number of masked nodes.
    pub count: usize,
    /// Nodes whose true-class probability fell below [`LOG_CLAMP`].
    pub clamped: usize,
}

impl NllLoss {
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.total / self.count as f64
        }
    }
}

/// How a per-node loss is reduced over the masked nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Plain sum over nodes.
    Sum,
    /// Sum divided by the number of masked nodes.
    #[default]
    Mean,
}

impl Reduction {
    pub fn factor(self, count: usize) -> f64 {
        match self {
            Reduction::Sum => 1.0,
            Reduction::Mean if count == 0 => 0.0,
            Reduction::Mean => 1.0 / count as f64,
        }
    }
}

pub(crate) fn check_labels(probs: &DenseMatrix, labels: &[usize], mask: &[bool]) -> Result<()> {
    if labels.len() != probs.rows() || mask.len() != probs.rows() {
        return Err(Error::shape(
            "masked loss",
            format!("{} labels and mask entries", probs.rows()),
            format!("{} labels, {} mask entries", labels.len(), mask.len()),
        ));
    }
    for (i, (&y, &m)) in labels.iter().zip(mask).enumerate() {
        if m && y >= probs.cols() {
            return Err(Error::input(format!(
                "label {y} of node {i} outside [0, {})",
                probs.cols()
            )));
        }
    }
    Ok(())
}

pub fn nll_loss(probs: &DenseMatrix, labels: &[usize], mask: &[bool]) -> Result<NllLoss> {
    check_labels(probs, labels, mask)?;
    let mut out = NllLoss {
        total: 0.0,
        count: 0,
        clamped: 0,
    };
    for (i, (&y, _)) in labels.iter().zip(mask).enumerate().filter(|(_, (_, &m))| m) {
        let p = probs[(i, y)];
        if p < LOG_CLAMP {
            out.clamped += 1;
        }
        out.total -= p.max(LOG_CLAMP).ln();
        out.count += 1;
    }
    Ok(out)
}

/// Gradient of `factor · Σ_masked −log softmax(logits)[y]` with respect to the
/// logits, given the softmax `probs`.
pub fn softmax_nll_grad(probs: &DenseMatrix, labels: &[usize], mask: &[bool], factor: f64) -> DenseMatrix {
    let mut grad = DenseMatrix::zeros(probs.rows(), probs.cols());
    for i in (0..probs.rows()).filter(|&i| mask[i]) {
        let g = grad.row_mut(i);
        for (gk, &pk) in g.iter_mut().zip(probs.row(i)) {
            *gk = factor * pk;
        }
        g[labels[i]] -= factor;
    }
    grad
}

/// Fraction of masked nodes whose argmax equals the label. NaN when the
/// mask is empty.
pub fn accuracy(predictions: &[usize], labels: &[usize], mask: &[bool]) -> f64 {
    let (hit, total) = predictions
        .iter()
        .zip(labels)
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0usize, 0usize), |(h, t), ((p, y), _)| (h + usize::from(p == y), t + 1));
    if total == 0 {
        f64::NAN
    } else {
        hit as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nll_closed_forms() {
        let p = DenseMatrix::from_vec(2, 2, vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        let one = nll_loss(&p, &[0, 1], &[true, false]).unwrap();
        assert!((one.total - std::f64::consts::LN_2).abs() < 1e-15);
        let two = nll_loss(&p, &[0, 1], &[true, true]).unwrap();
        assert!((two.total - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!((two.mean() - std::f64::consts::LN_2).abs() < 1e-15);

        let onehot = DenseMatrix::from_vec(1, 3, vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(nll_loss(&onehot, &[1], &[true]).unwrap().total, 0.0);
    }

    #[test]
    fn zero_probability_is_clamped_and_reported() {
        let p = DenseMatrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let loss = nll_loss(&p, &[1], &[true]).unwrap();
        assert_eq!(loss.clamped, 1);
        assert!((loss.total + LOG_CLAMP.ln()).abs() < 1e-12);
    }

    #[test]
    fn bad_label_is_input_error() {
        let p = DenseMatrix::from_vec(1, 2, vec![0.5, 0.5]).unwrap();
        assert!(matches!(nll_loss(&p, &[2], &[true]), Err(Error::Input(_))));
        // unmasked nodes are not checked
        assert!(nll_loss(&p, &[2], &[false]).is_ok());
    }

    #[test]
    fn accuracy_of_empty_mask_is_nan() {
        assert!(accuracy(&[0], &[0], &[false]).is_nan());
        assert_eq!(accuracy(&[0, 1, 1], &[0, 0, 1], &[true, true, true]), 2.0 / 3.0);
    }
}

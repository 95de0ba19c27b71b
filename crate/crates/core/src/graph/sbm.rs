use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::{build_csr, EdgeList};
use crate::datasets::{make_split, LabeledDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::nn::DenseMatrix;
use crate::seed::{self, tag};

/// Parameters of a planted-partition (stochastic block model) dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmConfig {
    pub num_nodes: usize,
    pub num_classes: usize,
    /// Edge probability between two nodes of the same class.
    pub p_in: f64,
    /// Edge probability between two nodes of different classes.
    pub p_out: f64,
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian noise added to each feature.
    pub feature_noise: f64,
    pub split: SplitSpec,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            num_nodes: 1500,
            num_classes: 3,
            p_in: 0.05,
            p_out: 0.005,
            feature_dim: 16,
            feature_noise: 8.0,
            split: SplitSpec {
                labels_per_class: 10,
                val_size: 300,
                test_size: 600,
            },
            seed: 0,
        }
    }
}

/// Samples a homophilous labeled graph.
///
/// Classes occupy contiguous, near-equal blocks of node ids. Each node's
/// feature vector is the one-hot indicator of its class (padded to
/// `feature_dim`) plus i.i.d. `N(0, feature_noise²)` noise. Masks come from
/// [`make_split`] with a seed derived from `config.seed`.
pub fn generate_sbm(config: &SbmConfig) -> Result<LabeledDataset> {
    let SbmConfig {
        num_nodes: n,
        num_classes: k,
        p_in,
        p_out,
        feature_dim,
        feature_noise,
        ..
    } = *config;
    if k == 0 || k > n {
        return Err(Error::input(format!(
            "num_classes must be in [1, num_nodes]; got {k} classes for {n} nodes"
        )));
    }
    for (name, p) in [("p_in", p_in), ("p_out", p_out)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::input(format!("{name} = {p} is not a probability")));
        }
    }
    if feature_dim < k {
        return Err(Error::input(format!(
            "feature_dim {feature_dim} cannot hold a one-hot centroid for {k} classes"
        )));
    }
    if !(feature_noise >= 0.0 && feature_noise.is_finite()) {
        return Err(Error::input("feature_noise must be finite and nonnegative"));
    }

    let labels: Vec<usize> = (0..n).map(|i| i * k / n).collect();
    let mut rng = seed::derived_rng(config.seed, tag::SBM, 0);

    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                pairs.push((i, j));
            }
        }
    }
    let graph = build_csr(&EdgeList::new(pairs), n)?;

    let mut features = DenseMatrix::zeros(n, feature_dim);
    let noise = Normal::new(0.0, feature_noise).map_err(|e| Error::input(e.to_string()))?;
    for (i, &label) in labels.iter().enumerate() {
        let row = features.row_mut(i);
        for v in row.iter_mut() {
            *v = if feature_noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        }
        row[label] += 1.0;
    }

    let masks = make_split(&labels, k, &config.split, seed::derive(config.seed, tag::SPLIT, 0))?;
    LabeledDataset::new(graph, features, labels, k, masks)
}

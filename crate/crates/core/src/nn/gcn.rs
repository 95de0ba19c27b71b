//! Two-layer graph convolution `Â · ReLU(Â · X · W1) · W2` with hand-written
//! reverse mode. The classifier and the calibration network share it; only
//! the loss attached to the output differs.

use rand::Rng as _;

use super::dense::{spmm, DenseMatrix};
use super::sparse::SparseRows;
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::seed::Rng;

/// Weights of a bias-free two-layer GCN: `w1` is `F×H`, `w2` is `H×K`.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub w1: DenseMatrix,
    pub w2: DenseMatrix,
}

impl GcnParams {
    pub fn new(w1: DenseMatrix, w2: DenseMatrix) -> Result<Self> {
        if w1.cols() != w2.rows() {
            return Err(Error::shape("GcnParams::new", w1.cols(), w2.rows()));
        }
        Ok(Self { w1, w2 })
    }

    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            w1: DenseMatrix::zeros(input, hidden),
            w2: DenseMatrix::zeros(hidden, output),
        }
    }

    /// Glorot-uniform initialization, limit `sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot(input: usize, hidden: usize, output: usize, rng: &mut Rng) -> Self {
        Self {
            w1: glorot(input, hidden, rng),
            w2: glorot(hidden, output, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.cols()
    }

    pub fn tensors(&self) -> [&DenseMatrix; 2] {
        [&self.w1, &self.w2]
    }

    pub fn tensors_mut(&mut self) -> [&mut DenseMatrix; 2] {
        [&mut self.w1, &mut self.w2]
    }

    pub fn squared_norm(&self) -> f64 {
        self.w1.squared_norm() + self.w2.squared_norm()
    }
}

fn glorot(fan_in: usize, fan_out: usize, rng: &mut Rng) -> DenseMatrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..limit))
        .collect();
    DenseMatrix::from_vec(fan_in, fan_out, data).expect("sized by construction")
}

/// Inverted-dropout multipliers (`0` or `1/(1-p)`) for the input and the
/// hidden activations.
///
/// Input multipliers exist only for the stored (nonzero) input entries, in
/// row-major order, so sparse features cost one draw per stored value.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub input: Vec<f64>,
    pub hidden: DenseMatrix,
}

impl DropoutMasks {
    pub fn sample(x: &SparseRows, hidden: usize, rate: f64, rng: &mut Rng) -> Self {
        let keep = 1.0 - rate;
        let scale = 1.0 / keep;
        let draw = |rng: &mut Rng| if rng.random::<f64>() < keep { scale } else { 0.0 };
        let input = (0..x.nnz()).map(|_| draw(rng)).collect();
        let mut hidden_mask = DenseMatrix::zeros(x.rows(), hidden);
        for m in hidden_mask.as_mut_slice() {
            *m = draw(rng);
        }
        Self {
            input,
            hidden: hidden_mask,
        }
    }
}

/// Activations kept from the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input after dropout; `None` when no dropout was applied.
    pub dropped_input: Option<SparseRows>,
    /// `Â · input · W1`, before the ReLU.
    pub pre_activation: DenseMatrix,
    /// ReLU output after dropout.
    pub hidden: DenseMatrix,
    /// `Â · hidden · W2`.
    pub output: DenseMatrix,
}

pub fn forward_cached(
    graph: &SparseGraph,
    x: &SparseRows,
    params: &GcnParams,
    dropout: Option<&DropoutMasks>,
) -> Result<ForwardCache> {
    if x.rows() != graph.num_nodes() {
        return Err(Error::shape("gcn_forward: feature rows", graph.num_nodes(), x.rows()));
    }
    if x.cols() != params.input_dim() {
        return Err(Error::shape("gcn_forward: feature dim", params.input_dim(), x.cols()));
    }
    let dropped_input = dropout.map(|masks| x.scale_values(&masks.input)).transpose()?;
    let input = dropped_input.as_ref().unwrap_or(x);
    let pre_activation = spmm(graph, &input.matmul(&params.w1)?)?;
    let mut hidden = pre_activation.map(|v| v.max(0.0));
    if let Some(masks) = dropout {
        hidden = hidden.hadamard(&masks.hidden)?;
    }
    let output = spmm(graph, &hidden.matmul(&params.w2)?)?;
    Ok(ForwardCache {
        dropped_input,
        pre_activation,
        hidden,
        output,
    })
}

/// `Â · ReLU(Â · X · W1) · W2`, with dropout multipliers when supplied.
pub fn gcn_forward(
    graph: &SparseGraph,
    x: &DenseMatrix,
    params: &GcnParams,
    dropout: Option<&DropoutMasks>,
) -> Result<DenseMatrix> {
    Ok(forward_cached(graph, &SparseRows::from_dense(x), params, dropout)?.output)
}

/// Gradients with respect to `W1` and `W2` given `d_output = ∂L/∂output`,
/// plus the `weight_decay · ‖W‖²/2` term on both layers. `Â` is symmetric,
/// so it is its own transpose.
pub fn gcn_backward(
    graph: &SparseGraph,
    x: &SparseRows,
    params: &GcnParams,
    cache: &ForwardCache,
    dropout: Option<&DropoutMasks>,
    d_output: &DenseMatrix,
    weight_decay: f64,
) -> Result<GcnParams> {
    if d_output.shape() != cache.output.shape() {
        return Err(Error::shape(
            "gcn_backward",
            format!("{:?}", cache.output.shape()),
            format!("{:?}", d_output.shape()),
        ));
    }
    let d_hw = spmm(graph, d_output)?;
    let mut d_w2 = cache.hidden.t_matmul(&d_hw)?;
    let mut d_hidden = d_hw.matmul_t(&params.w2)?;
    if let Some(masks) = dropout {
        d_hidden = d_hidden.hadamard(&masks.hidden)?;
    }
    for (g, &pre) in d_hidden.as_mut_slice().iter_mut().zip(cache.pre_activation.as_slice()) {
        if pre <= 0.0 {
            *g = 0.0;
        }
    }
    let d_xw = spmm(graph, &d_hidden)?;
    let mut d_w1 = cache.dropped_input.as_ref().unwrap_or(x).t_matmul(&d_xw)?;
    if weight_decay != 0.0 {
        d_w1.add_scaled(weight_decay, &params.w1)?;
        d_w2.add_scaled(weight_decay, &params.w2)?;
    }
    Ok(GcnParams { w1: d_w1, w2: d_w2 })
}

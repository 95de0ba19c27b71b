//! Sparse undirected graphs in CSR form, symmetric renormalization, and the
//! stochastic block model generator used for synthetic experiments.

mod sbm;

pub use sbm::{generate_sbm, SbmConfig};

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io;

pub type NodeId = usize;

/// Undirected edges as unordered node pairs. Self-pairs are tolerated and
/// dropped by [`build_csr`]; self-loops are added by [`normalize_sym`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeList {
    pub pairs: Vec<(NodeId, NodeId)>,
}

impl EdgeList {
    pub fn new(pairs: Vec<(NodeId, NodeId)>) -> Self {
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Reads the edge list format: two base-10 node ids per line separated
    /// by whitespace (commas also accepted), `#` lines ignored.
    pub fn read(path: &Path) -> Result<Self> {
        let records = io::read_records(path)?;
        let mut pairs = Vec::with_capacity(records.len());
        for rec in &records {
            if rec.fields.len() != 2 {
                return Err(io::parse_error(
                    path,
                    rec.line,
                    format!("expected two node ids, found {} fields", rec.fields.len()),
                ));
            }
            let a = io::field(path, rec, 0, "source node id")?;
            let b = io::field(path, rec, 1, "target node id")?;
            pairs.push((a, b));
        }
        Ok(Self { pairs })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for &(a, b) in &self.pairs {
            writeln!(out, "{a} {b}").unwrap();
        }
        out
    }
}

/// Square sparse matrix in compressed sparse row layout.
///
/// Invariants: `row_ptr` is nondecreasing with `row_ptr[0] == 0` and
/// `row_ptr[n] == col_idx.len()`; columns are strictly increasing inside a
/// row; the matrix is symmetric, including values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    num_nodes: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<NodeId>,
    values: Vec<f64>,
}

/// Builds a symmetric 0/1 adjacency from `edges`. Duplicate and reversed
/// pairs collapse to one entry; self-pairs are dropped.
pub fn build_csr(edges: &EdgeList, num_nodes: usize) -> Result<SparseGraph> {
    let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); num_nodes];
    for &(a, b) in &edges.pairs {
        if a >= num_nodes || b >= num_nodes {
            return Err(Error::input(format!(
                "edge ({a}, {b}) references a node outside [0, {num_nodes})"
            )));
        }
        if a == b {
            continue;
        }
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut row_ptr = Vec::with_capacity(num_nodes + 1);
    let mut col_idx = Vec::new();
    row_ptr.push(0);
    for mut row in adj {
        row.sort_unstable();
        row.dedup();
        col_idx.extend_from_slice(&row);
        row_ptr.push(col_idx.len());
    }
    let values = vec![1.0; col_idx.len()];
    Ok(SparseGraph {
        num_nodes,
        row_ptr,
        col_idx,
        values,
    })
}

/// Returns `D̃^{-1/2} (A + I) D̃^{-1/2}` where `D̃` is the degree of `A + I`.
///
/// Any self-loop already present is replaced, so every node carries exactly
/// one self-loop of weight 1 before scaling.
pub fn normalize_sym(graph: &SparseGraph) -> SparseGraph {
    let n = graph.num_nodes;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(graph.col_idx.len() + n);
    let mut raw = Vec::with_capacity(graph.col_idx.len() + n);
    row_ptr.push(0);
    for i in 0..n {
        let mut inserted = false;
        for (j, v) in graph.row_entries(i) {
            if j == i {
                continue;
            }
            if !inserted && j > i {
                col_idx.push(i);
                raw.push(1.0);
                inserted = true;
            }
            col_idx.push(j);
            raw.push(v);
        }
        if !inserted {
            col_idx.push(i);
            raw.push(1.0);
        }
        row_ptr.push(col_idx.len());
    }
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = raw[row_ptr[i]..row_ptr[i + 1]].iter().sum();
            1.0 / d.sqrt()
        })
        .collect();
    let mut values = raw;
    for i in 0..n {
        for k in row_ptr[i]..row_ptr[i + 1] {
            values[k] *= inv_sqrt_deg[i] * inv_sqrt_deg[col_idx[k]];
        }
    }
    SparseGraph {
        num_nodes: n,
        row_ptr,
        col_idx,
        values,
    }
}

impl SparseGraph {
    /// Assembles a graph from raw CSR arrays, checking every invariant.
    pub fn from_csr(
        num_nodes: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<NodeId>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != num_nodes + 1 || row_ptr[0] != 0 {
            return Err(Error::input("row_ptr must have num_nodes + 1 entries starting at 0"));
        }
        if *row_ptr.last().unwrap() != col_idx.len() || col_idx.len() != values.len() {
            return Err(Error::input("row_ptr, col_idx and values lengths disagree"));
        }
        for w in row_ptr.windows(2) {
            if w[1] < w[0] {
                return Err(Error::input("row_ptr is not nondecreasing"));
            }
        }
        let graph = Self {
            num_nodes,
            row_ptr,
            col_idx,
            values,
        };
        for i in 0..num_nodes {
            let cols = graph.row_cols(i);
            if cols.iter().any(|&j| j >= num_nodes) {
                return Err(Error::input(format!("row {i} has a column out of range")));
            }
            if cols.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::input(format!("row {i} columns not strictly increasing")));
            }
        }
        if !graph.is_symmetric() {
            return Err(Error::input("matrix is not symmetric"));
        }
        Ok(graph)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[NodeId] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_cols(&self, i: NodeId) -> &[NodeId] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row_values(&self, i: NodeId) -> &[f64] {
        &self.values[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row_entries(&self, i: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.row_cols(i)
            .iter()
            .copied()
            .zip(self.row_values(i).iter().copied())
    }

    pub fn get(&self, i: NodeId, j: NodeId) -> Option<f64> {
        let cols = self.row_cols(i);
        cols.binary_search(&j).ok().map(|k| self.row_values(i)[k])
    }

    /// Number of nonzero off-diagonal entries in row `i`.
    pub fn degree(&self, i: NodeId) -> usize {
        self.row_cols(i).iter().filter(|&&j| j != i).count()
    }

    /// Each undirected off-diagonal edge once, as `(i, j)` with `i < j`, in
    /// row-major order.
    pub fn undirected_edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.num_nodes).flat_map(move |i| {
            self.row_cols(i)
                .iter()
                .copied()
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    pub fn num_undirected_edges(&self) -> usize {
        self.undirected_edges().count()
    }

    pub fn to_edge_list(&self) -> EdgeList {
        EdgeList::new(self.undirected_edges().collect())
    }

    /// Exact entrywise symmetry check.
    pub fn is_symmetric(&self) -> bool {
        (0..self.num_nodes).all(|i| {
            self.row_entries(i)
                .all(|(j, v)| self.get(j, i).is_some_and(|w| w.to_bits() == v.to_bits()))
        })
    }

    /// Transpose in CSR form. Used to check symmetry structurally.
    pub fn transpose(&self) -> SparseGraph {
        let n = self.num_nodes;
        let mut counts = vec![0usize; n + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..n {
            for (j, v) in self.row_entries(i) {
                let slot = next[j];
                col_idx[slot] = i;
                values[slot] = v;
                next[j] += 1;
            }
        }
        SparseGraph {
            num_nodes: n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Sparse matrix times dense vector.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.num_nodes)
            .map(|i| self.row_entries(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn identity(n: usize) -> SparseGraph {
        SparseGraph {
            num_nodes: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path3() -> SparseGraph {
        build_csr(&EdgeList::new(vec![(0, 1), (1, 2)]), 3).unwrap()
    }

    #[test]
    fn single_edge_is_symmetrized() {
        let g = build_csr(&EdgeList::new(vec![(0, 1)]), 2).unwrap();
        assert_eq!(g.row_ptr(), &[0, 1, 2]);
        assert_eq!(g.col_idx(), &[1, 0]);
        assert_eq!(g.values(), &[1.0, 1.0]);
    }

    #[test]
    fn reversed_duplicate_is_merged() {
        let a = build_csr(&EdgeList::new(vec![(0, 1)]), 2).unwrap();
        let b = build_csr(&EdgeList::new(vec![(0, 1), (1, 0), (0, 1)]), 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn path_has_four_entries() {
        let g = path3();
        assert_eq!(g.nnz(), 4);
        assert_eq!(g.row_ptr(), &[0, 1, 3, 4]);
        assert_eq!(g.num_undirected_edges(), 2);
    }

    #[test]
    fn out_of_range_node_is_rejected() {
        let err = build_csr(&EdgeList::new(vec![(0, 3)]), 3).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn self_pairs_are_dropped() {
        let g = build_csr(&EdgeList::new(vec![(1, 1), (0, 1)]), 2).unwrap();
        assert_eq!(g.nnz(), 2);
        assert_eq!(g.get(1, 1), None);
    }

    #[test]
    fn normalize_isolated_node() {
        let g = build_csr(&EdgeList::default(), 1).unwrap();
        let a = normalize_sym(&g);
        assert_eq!(a.get(0, 0), Some(1.0));
        assert_eq!(a.nnz(), 1);
    }

    #[test]
    fn normalize_single_edge_gives_halves() {
        let g = build_csr(&EdgeList::new(vec![(0, 1)]), 2).unwrap();
        let a = normalize_sym(&g);
        for i in 0..2 {
            for j in 0..2 {
                assert!((a.get(i, j).unwrap() - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn normalize_path_center_entry() {
        let a = normalize_sym(&path3());
        assert!((a.get(1, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((a.get(0, 1).unwrap() - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((a.get(0, 0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn normalize_replaces_existing_self_loops() {
        let g = SparseGraph::from_csr(2, vec![0, 2, 3], vec![0, 1, 0], vec![5.0, 1.0, 1.0]).unwrap();
        let a = normalize_sym(&g);
        assert!((a.get(0, 0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn from_csr_rejects_asymmetry() {
        let err = SparseGraph::from_csr(2, vec![0, 1, 1], vec![1], vec![1.0]).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn edge_list_file_parses_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edges.txt");
        std::fs::write(&path, "# cites\n0 1\n1\t2\n").unwrap();
        let edges = EdgeList::read(&path).unwrap();
        assert_eq!(edges.pairs, vec![(0, 1), (1, 2)]);
        std::fs::write(&path, "0 1\n1 x\n").unwrap();
        let err = EdgeList::read(&path).unwrap_err().to_string();
        assert!(err.contains("edges.txt:2"), "{err}");
    }

    fn largest_eigenvalue(a: &SparseGraph) -> f64 {
        let n = a.num_nodes();
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.37).sin().abs()).collect();
        let mut lambda = 0.0;
        for _ in 0..2000 {
            let y = a.mul_vec(&x);
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            lambda = norm / xn;
            x = y.into_iter().map(|v| v / norm).collect();
        }
        lambda
    }

    fn arb_edges() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (1usize..12).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..40)))
    }

    proptest! {
        #[test]
        fn csr_and_normalized_are_symmetric((n, pairs) in arb_edges()) {
            let g = build_csr(&EdgeList::new(pairs), n).unwrap();
            prop_assert_eq!(&g.transpose(), &g);
            let a = normalize_sym(&g);
            prop_assert_eq!(&a.transpose(), &a);
            for i in 0..n {
                let di = g.degree(i) as f64 + 1.0;
                for (j, v) in a.row_entries(i) {
                    let dj = g.degree(j) as f64 + 1.0;
                    prop_assert!((v - 1.0 / (di * dj).sqrt()).abs() < 1e-14);
                }
            }
        }

        #[test]
        fn normalized_spectrum_is_bounded((n, pairs) in arb_edges()) {
            let a = normalize_sym(&build_csr(&EdgeList::new(pairs), n).unwrap());
            prop_assert!(largest_eigenvalue(&a) <= 1.0 + 1e-9);
        }
    }
}

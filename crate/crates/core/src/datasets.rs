//! Labeled graph datasets: the in-memory type, the plain-text directory
//! format, and per-class split construction.
//!
//! A dataset directory holds
//!
//! * `edges.txt` — the edge list format (two node ids per line),
//! * `features.csv` — `node_id,f0,…,f{F-1}` per node,
//! * `labels.csv` — `node_id,class` per node,
//! * `masks.csv` (optional) — `node_id,split` with split one of
//!   `train`, `val`, `test`; unlisted nodes form the unlabeled pool.
//!
//! Fields may be separated by commas or whitespace and `#` starts a comment
//! line. Node ids must cover `0..N` exactly once in both the feature and the
//! label file.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::graph::{build_csr, EdgeList, SparseGraph};
use crate::io;
use crate::nn::DenseMatrix;
use crate::seed;

pub const EDGES_FILE: &str = "edges.txt";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const MASKS_FILE: &str = "masks.csv";

/// Train/validation/test membership, one flag per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMasks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl SplitMasks {
    pub fn empty(n: usize) -> Self {
        Self {
            train: vec![false; n],
            val: vec![false; n],
            test: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    pub fn is_disjoint(&self) -> bool {
        (0..self.len()).all(|i| u8::from(self.train[i]) + u8::from(self.val[i]) + u8::from(self.test[i]) <= 1)
    }

    /// Nodes in none of the three masks.
    pub fn unlabeled_pool(&self) -> Vec<bool> {
        (0..self.len())
            .map(|i| !(self.train[i] || self.val[i] || self.test[i]))
            .collect()
    }

    pub fn count(mask: &[bool]) -> usize {
        mask.iter().filter(|&&m| m).count()
    }
}

/// Sizes for [`make_split`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub labels_per_class: usize,
    pub val_size: usize,
    pub test_size: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            labels_per_class: 20,
            val_size: 500,
            test_size: 1000,
        }
    }
}

/// Shuffles node ids with `seed`, takes the first `labels_per_class` of each
/// class (in shuffled order) for training, then the next `val_size`
/// remaining nodes for validation and the next `test_size` for test.
pub fn make_split(labels: &[usize], num_classes: usize, spec: &SplitSpec, seed: u64) -> Result<SplitMasks> {
    let n = labels.len();
    let mut per_class = vec![0usize; num_classes];
    for &y in labels {
        if y >= num_classes {
            return Err(Error::input(format!("label {y} outside [0, {num_classes})")));
        }
        per_class[y] += 1;
    }
    if let Some(c) = per_class.iter().position(|&c| c < spec.labels_per_class) {
        return Err(Error::input(format!(
            "class {c} has {} nodes, fewer than {} labels per class",
            per_class[c], spec.labels_per_class
        )));
    }
    let needed = spec.labels_per_class * num_classes + spec.val_size + spec.test_size;
    if needed > n {
        return Err(Error::input(format!(
            "split needs {needed} nodes but the dataset has {n}"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));

    let mut masks = SplitMasks::empty(n);
    let mut taken = vec![0usize; num_classes];
    let mut rest = Vec::with_capacity(n);
    for &i in &order {
        if taken[labels[i]] < spec.labels_per_class {
            taken[labels[i]] += 1;
            masks.train[i] = true;
        } else {
            rest.push(i);
        }
    }
    for &i in &rest[..spec.val_size] {
        masks.val[i] = true;
    }
    for &i in &rest[spec.val_size..spec.val_size + spec.test_size] {
        masks.test[i] = true;
    }
    Ok(masks)
}

/// Graph, node features, labels and split masks.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    /// Raw 0/1 adjacency, not normalized.
    pub graph: SparseGraph,
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub masks: SplitMasks,
}

impl LabeledDataset {
    pub fn new(
        graph: SparseGraph,
        features: DenseMatrix,
        labels: Vec<usize>,
        num_classes: usize,
        masks: SplitMasks,
    ) -> Result<Self> {
        let n = graph.num_nodes();
        if features.rows() != n || labels.len() != n || masks.len() != n {
            return Err(Error::shape(
                "LabeledDataset::new",
                format!("{n} nodes everywhere"),
                format!(
                    "{} feature rows, {} labels, {} mask entries",
                    features.rows(),
                    labels.len(),
                    masks.len()
                ),
            ));
        }
        if let Some(i) = labels.iter().position(|&y| y >= num_classes) {
            return Err(Error::input(format!(
                "label {} of node {i} outside [0, {num_classes})",
                labels[i]
            )));
        }
        if !masks.is_disjoint() {
            return Err(Error::input("train/val/test masks overlap"));
        }
        if !features.all_finite() {
            return Err(Error::input("features contain non-finite values"));
        }
        Ok(Self {
            graph,
            features,
            labels,
            num_classes,
            masks,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn summary(&self) -> String {
        format!(
            "nodes={} edges={} classes={} features={} train={} val={} test={} pool={}",
            self.num_nodes(),
            self.graph.num_undirected_edges(),
            self.num_classes,
            self.feature_dim(),
            SplitMasks::count(&self.masks.train),
            SplitMasks::count(&self.masks.val),
            SplitMasks::count(&self.masks.test),
            SplitMasks::count(&self.masks.unlabeled_pool()),
        )
    }
}

/// Options for [`load_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    /// Divide each feature row by its L1 norm (when nonzero).
    pub row_normalize: bool,
    /// Split used when `masks.csv` is absent, with its seed.
    pub split: Option<(SplitSpec, u64)>,
    /// Ignore `masks.csv` even if present and always use `split`.
    pub force_split: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            row_normalize: true,
            split: None,
            force_split: false,
        }
    }
}

fn read_node_table(path: &Path) -> Result<Vec<(usize, io::Record)>> {
    let records = io::read_records(path)?;
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        let id: usize = io::field(path, &rec, 0, "node_id")?;
        out.push((id, rec));
    }
    Ok(out)
}

fn check_ids_cover(path: &Path, rows: &[(usize, io::Record)], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for (id, rec) in rows {
        if *id >= n {
            return Err(io::parse_error(path, rec.line, format!("node id {id} outside [0, {n})")));
        }
        if std::mem::replace(&mut seen[*id], true) {
            return Err(io::parse_error(path, rec.line, format!("duplicate node id {id}")));
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("node id {missing} has no row"),
        });
    }
    Ok(())
}

/// Reads `node_id,class` rows covering ids `0..N` exactly once.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let label_rows = read_node_table(path)?;
    let n = label_rows.len();
    check_ids_cover(path, &label_rows, n)?;
    let mut labels = vec![0usize; n];
    for (id, rec) in &label_rows {
        if rec.fields.len() != 2 {
            return Err(io::parse_error(path, rec.line, "expected node_id,class"));
        }
        labels[*id] = io::field(path, rec, 1, "class id")?;
    }
    Ok(labels)
}

pub fn load_dataset(dir: &Path, options: &LoadOptions) -> Result<LabeledDataset> {
    let labels_path = dir.join(LABELS_FILE);
    let labels = read_labels(&labels_path)?;
    let n = labels.len();
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);

    let features_path = dir.join(FEATURES_FILE);
    let feature_rows = read_node_table(&features_path)?;
    if feature_rows.len() != n {
        return Err(Error::input(format!(
            "{} has {} rows but {} has {n}",
            features_path.display(),
            feature_rows.len(),
            labels_path.display()
        )));
    }
    check_ids_cover(&features_path, &feature_rows, n)?;
    let dim = feature_rows.first().map_or(0, |(_, r)| r.fields.len() - 1);
    let mut features = DenseMatrix::zeros(n, dim);
    for (id, rec) in &feature_rows {
        if rec.fields.len() != dim + 1 {
            return Err(io::parse_error(
                &features_path,
                rec.line,
                format!("expected {dim} features, found {}", rec.fields.len() - 1),
            ));
        }
        for c in 0..dim {
            features[(*id, c)] = io::finite_field(&features_path, rec, c + 1, "feature")?;
        }
    }
    if options.row_normalize {
        features.row_normalize_l1();
    }

    let edges = EdgeList::read(&dir.join(EDGES_FILE))?;
    let graph = build_csr(&edges, n).map_err(|e| match e {
        Error::Input(msg) => Error::input(format!("{}: {msg}", dir.join(EDGES_FILE).display())),
        other => other,
    })?;

    let masks_path = dir.join(MASKS_FILE);
    let masks = if masks_path.exists() && !options.force_split {
        read_masks(&masks_path, n)?
    } else if let Some((spec, seed)) = options.split {
        make_split(&labels, num_classes, &spec, seed)?
    } else {
        return Err(Error::input(format!(
            "{} is missing and no split was configured",
            masks_path.display()
        )));
    };
    LabeledDataset::new(graph, features, labels, num_classes, masks)
}

/// Reads `node_id,split` rows; nodes without a row belong to no split.
pub fn read_masks(path: &Path, n: usize) -> Result<SplitMasks> {
    let mut masks = SplitMasks::empty(n);
    for (id, rec) in read_node_table(path)? {
        if id >= n {
            return Err(io::parse_error(path, rec.line, format!("node id {id} outside [0, {n})")));
        }
        let split: String = io::field(path, &rec, 1, "split name")?;
        let slot = match split.as_str() {
            "train" => &mut masks.train,
            "val" => &mut masks.val,
            "test" => &mut masks.test,
            other => {
                return Err(io::parse_error(path, rec.line, format!("unknown split {other:?}")));
            }
        };
        slot[id] = true;
    }
    if !masks.is_disjoint() {
        return Err(Error::input(format!("{}: a node appears in two splits", path.display())));
    }
    Ok(masks)
}

/// Writes `dataset` in the directory format; [`load_dataset`] with
/// `row_normalize: false` reads it back field for field.
pub fn save_dataset(dataset: &LabeledDataset, dir: &Path) -> Result<()> {
    io::write_string(&dir.join(EDGES_FILE), &dataset.graph.to_edge_list().to_text())?;

    let mut features = String::new();
    for i in 0..dataset.num_nodes() {
        write!(features, "{i}").unwrap();
        for v in dataset.features.row(i) {
            write!(features, ",{v}").unwrap();
        }
        features.push('\n');
    }
    io::write_string(&dir.join(FEATURES_FILE), &features)?;

    let mut labels = String::new();
    for (i, y) in dataset.labels.iter().enumerate() {
        writeln!(labels, "{i},{y}").unwrap();
    }
    io::write_string(&dir.join(LABELS_FILE), &labels)?;

    let mut masks = String::new();
    for i in 0..dataset.num_nodes() {
        let name = if dataset.masks.train[i] {
            "train"
        } else if dataset.masks.val[i] {
            "val"
        } else if dataset.masks.test[i] {
            "test"
        } else {
            continue;
        };
        writeln!(masks, "{i},{name}").unwrap();
    }
    io::write_string(&dir.join(MASKS_FILE), &masks)
}

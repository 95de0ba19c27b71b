//! Row-compressed storage for the network input. Bag-of-words features are
//! mostly zeros, so products against them skip the zero entries entirely.

use super::dense::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRows {
    /// Stores the nonzero entries of `dense` in row-major order.
    pub fn from_dense(dense: &DenseMatrix) -> Self {
        let mut row_ptr = Vec::with_capacity(dense.rows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in dense.iter_rows() {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(values.len());
        }
        Self {
            rows: dense.rows(),
            cols: dense.cols(),
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[(r, self.col_idx[k])] = self.values[k];
            }
        }
        out
    }

    /// Same pattern with each stored value multiplied by `factors[k]`.
    pub fn scale_values(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.nnz() {
            return Err(Error::shape("SparseRows::scale_values", self.nnz(), factors.len()));
        }
        Ok(Self {
            values: self.values.iter().zip(factors).map(|(v, f)| v * f).collect(),
            ..self.clone()
        })
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows() {
            return Err(Error::shape("SparseRows::matmul", self.cols, rhs.rows()));
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols());
        for r in 0..self.rows {
            let dst = out.row_mut(r);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.values[k];
                for (d, &w) in dst.iter_mut().zip(rhs.row(self.col_idx[k])) {
                    *d += v * w;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · rhs`.
    pub fn t_matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != rhs.rows() {
            return Err(Error::shape("SparseRows::t_matmul", self.rows, rhs.rows()));
        }
        let mut out = DenseMatrix::zeros(self.cols, rhs.cols());
        for r in 0..self.rows {
            let src = rhs.row(r);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.values[k];
                for (d, &s) in out.row_mut(self.col_idx[k]).iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
        Ok(out)
    }
}

impl From<&DenseMatrix> for SparseRows {
    fn from(dense: &DenseMatrix) -> Self {
        Self::from_dense(dense)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DenseMatrix {
        DenseMatrix::from_vec(3, 4, vec![0.0, 1.5, 0.0, -2.0, 0.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.5, 0.0]).unwrap()
    }

    #[test]
    fn round_trip_keeps_only_nonzeros() {
        let d = sample();
        let s = SparseRows::from_dense(&d);
        assert_eq!(s.nnz(), 4);
        assert_eq!(s.to_dense(), d);
    }

    #[test]
    fn products_match_dense() {
        let d = sample();
        let s = SparseRows::from_dense(&d);
        let w = DenseMatrix::from_vec(4, 2, vec![1.0, 2.0, -1.0, 0.5, 3.0, 0.0, 0.25, -4.0]).unwrap();
        assert_eq!(s.matmul(&w).unwrap(), d.matmul(&w).unwrap());
        let g = DenseMatrix::from_vec(3, 2, vec![1.0, -1.0, 2.0, 0.0, 0.5, 3.0]).unwrap();
        assert_eq!(s.t_matmul(&g).unwrap(), d.t_matmul(&g).unwrap());
        assert!(s.matmul(&g).is_err());
    }

    #[test]
    fn scale_values_keeps_pattern() {
        let s = SparseRows::from_dense(&sample());
        let scaled = s.scale_values(&[2.0, 0.0, 1.0, -1.0]).unwrap();
        assert_eq!(scaled.to_dense().as_slice(), &[0.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 3.0, 0.0, -0.5, 0.0]);
        assert!(s.scale_values(&[1.0]).is_err());
    }
}

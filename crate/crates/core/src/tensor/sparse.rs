//! Compressed sparse row matrices and sparse-dense products.

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a CSR matrix from raw arrays. Column indices within each row
    /// must be strictly increasing.
    pub fn new(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let bad = |msg: &str| Error::param(format!("csr: {msg}"));
        if row_offsets.len() != rows + 1 || row_offsets[0] != 0 {
            return Err(bad("row_offsets must have rows + 1 entries starting at 0"));
        }
        if *row_offsets.last().unwrap() != col_indices.len() || values.len() != col_indices.len() {
            return Err(bad("offsets, indices and values disagree in length"));
        }
        for r in 0..rows {
            let (s, e) = (row_offsets[r], row_offsets[r + 1]);
            if s > e {
                return Err(bad("row_offsets must be nondecreasing"));
            }
            let row = &col_indices[s..e];
            if row.iter().any(|&c| c >= cols) || row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad("column indices out of range or not strictly sorted"));
            }
        }
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
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

    /// `(column, value)` pairs of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_offsets[r], self.row_offsets[r + 1]);
        self.col_indices[s..e]
            .iter()
            .copied()
            .zip(self.values[s..e].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (s, e) = (self.row_offsets[r], self.row_offsets[r + 1]);
        match self.col_indices[s..e].binary_search(&c) {
            Ok(i) => self.values[s + i],
            Err(_) => 0.0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.cols {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut next = counts;
        let mut cols = vec![0; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                let slot = next[c];
                cols[slot] = r;
                vals[slot] = v;
                next[c] += 1;
            }
        }
        CsrMatrix {
            rows: self.cols,
            cols: self.rows,
            row_offsets: offsets,
            col_indices: cols,
            values: vals,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && *self == self.transpose()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Sparse-dense product `self * x`.
    pub fn spmm(&self, x: &Matrix) -> Result<Matrix> {
        if self.cols != x.rows() {
            return Err(Error::ShapeMismatch {
                op: "spmm",
                left: (self.rows, self.cols),
                right: x.shape(),
            });
        }
        let mut out = Matrix::zeros(self.rows, x.cols());
        for r in 0..self.rows {
            let dst = out.row_mut(r);
            for (c, v) in self.row(r) {
                for (d, s) in dst.iter_mut().zip(x.row(c)) {
                    *d += v * s;
                }
            }
        }
        Ok(out)
    }
}

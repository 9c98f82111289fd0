use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices in every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

/// Borrowed view of one row.
#[derive(Debug, Clone, Copy)]
pub struct Row<'a> {
    pub indices: &'a [usize],
    pub values: &'a [f64],
}

impl<'a> Row<'a> {
    pub fn dot(&self, other: &Row<'_>) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn get(&self, col: usize) -> f64 {
        match self.indices.binary_search(&col) {
            Ok(k) => self.values[k],
            Err(_) => 0.0,
        }
    }
}

impl SparseMatrix {
    pub fn empty(cols: usize) -> Self {
        SparseMatrix {
            rows: 0,
            cols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends a row given as `(column, value)` pairs; pairs are sorted and
    /// explicit zeros dropped.
    pub fn push_row(&mut self, mut entries: Vec<(usize, f64)>) {
        entries.sort_by_key(|e| e.0);
        for (c, v) in entries {
            debug_assert!(c < self.cols);
            if v != 0.0 {
                self.indices.push(c);
                self.values.push(v);
            }
        }
        self.indptr.push(self.indices.len());
        self.rows += 1;
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = SparseMatrix::empty(cols);
        for r in rows {
            m.push_row(r.iter().copied().enumerate().collect());
        }
        m
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| {
                let mut d = vec![0.0; self.cols];
                let r = self.row(i);
                for (&c, &v) in r.indices.iter().zip(r.values) {
                    d[c] = v;
                }
                d
            })
            .collect()
    }

    pub fn row(&self, i: usize) -> Row<'_> {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        Row {
            indices: &self.indices[a..b],
            values: &self.values[a..b],
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn select_rows(&self, idx: &[usize]) -> SparseMatrix {
        let mut m = SparseMatrix::empty(self.cols);
        for &i in idx {
            let r = self.row(i);
            m.indices.extend_from_slice(r.indices);
            m.values.extend_from_slice(r.values);
            m.indptr.push(m.indices.len());
            m.rows += 1;
        }
        m
    }

    /// Column-wise concatenation `[self | other]`.
    pub fn hstack(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "hstack of {} and {} rows",
                self.rows, other.rows
            )));
        }
        let mut m = SparseMatrix::empty(self.cols + other.cols);
        for i in 0..self.rows {
            let (a, b) = (self.row(i), other.row(i));
            m.indices.extend_from_slice(a.indices);
            m.values.extend_from_slice(a.values);
            m.indices.extend(b.indices.iter().map(|c| c + self.cols));
            m.values.extend_from_slice(b.values);
            m.indptr.push(m.indices.len());
            m.rows += 1;
        }
        Ok(m)
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    /// Variance over every cell, implicit zeros included.
    pub fn cell_variance(&self) -> f64 {
        let n = (self.rows * self.cols) as f64;
        if n == 0.0 {
            return 0.0;
        }
        let sum: f64 = self.values.iter().sum();
        let sq: f64 = self.values.iter().map(|v| v * v).sum();
        let m = sum / n;
        (sq / n - m * m).max(0.0)
    }
}

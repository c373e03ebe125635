use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseVector;

/// Row-major sparse matrix with sorted column indices per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn from_rows(rows: Vec<SparseVector>, n_cols: usize) -> Result<Self> {
        let mut out = Vec::with_capacity(rows.len());
        for (r, row) in rows.into_iter().enumerate() {
            if row.dim != n_cols {
                return Err(Error::Shape(format!(
                    "row {r} has dimension {}, expected {n_cols}",
                    row.dim
                )));
            }
            out.push(row.entries);
        }
        Self::from_entries(out, n_cols)
    }

    pub fn from_entries(rows: Vec<Vec<(usize, f64)>>, n_cols: usize) -> Result<Self> {
        for (r, row) in rows.iter().enumerate() {
            for w in row.windows(2) {
                if w[0].0 >= w[1].0 {
                    return Err(Error::InvalidInput(format!(
                        "row {r}: column indices not strictly increasing"
                    )));
                }
            }
            if let Some(&(c, _)) = row.last() {
                if c >= n_cols {
                    return Err(Error::Shape(format!("row {r}: column {c} >= {n_cols}")));
                }
            }
            if let Some(&(c, v)) = row.iter().find(|(_, v)| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "row {r}, column {c}: non-finite feature {v}"
                )));
            }
        }
        Ok(SparseMatrix { n_cols, rows })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let entries = rows
            .iter()
            .map(|r| {
                if r.len() != n_cols {
                    return Err(Error::Shape("ragged dense rows".into()));
                }
                Ok(r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, v)| (i, *v))
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_entries(entries, n_cols)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.rows[r]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Value at (r, c), zero when absent.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = &self.rows[r];
        row.binary_search_by_key(&c, |&(i, _)| i)
            .map_or(0.0, |k| row[k].1)
    }

    /// `X w`
    pub fn mul_vec(&self, w: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * w[c]).sum())
            .collect()
    }

    /// `Xᵀ r`
    pub fn t_mul_vec(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for (row, &ri) in self.rows.iter().zip(r) {
            for &(c, v) in row {
                out[c] += v * ri;
            }
        }
        out
    }

    /// Column means.
    pub fn col_means(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for row in &self.rows {
            for &(c, v) in row {
                out[c] += v;
            }
        }
        let n = self.rows.len().max(1) as f64;
        out.iter_mut().for_each(|m| *m /= n);
        out
    }

    /// Column-major copy: for every column, its `(row, value)` entries.
    pub fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.n_cols];
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                cols[c].push((r, v));
            }
        }
        cols
    }

    pub fn select_rows(&self, idx: &[usize]) -> SparseMatrix {
        SparseMatrix {
            n_cols: self.n_cols,
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

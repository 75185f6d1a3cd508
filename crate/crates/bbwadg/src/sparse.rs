//! Compressed-row sparse operators for elevation, reduction, derivative and
//! multiplication stencils.

/// CSR matrix. All operator rows in this crate have a small fixed bandwidth,
/// so apply cost is `nnz` multiply-adds.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub nrows: usize,
    pub ncols: usize,
    row_ptr: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseOperator {
    /// Build from per-row entry lists.
    pub fn from_rows(ncols: usize, rows: &[Vec<(usize, f64)>]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0u32);
        for r in rows {
            for &(c, v) in r {
                debug_assert!(c < ncols);
                cols.push(c as u32);
                vals.push(v);
            }
            row_ptr.push(cols.len() as u32);
        }
        Self {
            nrows: rows.len(),
            ncols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn max_nnz_per_row(&self) -> usize {
        (0..self.nrows)
            .map(|r| (self.row_ptr[r + 1] - self.row_ptr[r]) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[r] as usize;
        let hi = self.row_ptr[r + 1] as usize;
        self.cols[lo..hi]
            .iter()
            .zip(&self.vals[lo..hi])
            .map(|(&c, &v)| (c as usize, v))
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let lo = self.row_ptr[r] as usize;
            let hi = self.row_ptr[r + 1] as usize;
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            y[r] = acc;
        }
    }

    /// `y += s * A x`.
    pub fn apply_scaled_add(&self, s: f64, x: &[f64], y: &mut [f64]) {
        for r in 0..self.nrows {
            let lo = self.row_ptr[r] as usize;
            let hi = self.row_ptr[r + 1] as usize;
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            y[r] += s * acc;
        }
    }

    /// Explicit transpose (stored CSR).
    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.ncols];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                rows[c].push((r, v));
            }
        }
        Self::from_rows(self.nrows, &rows)
    }

    /// Dense copy, row-major.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Coordinate-format dump, one `row col value` line per entry.
    pub fn dump_coo(&self) -> String {
        let mut s = String::new();
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                s.push_str(&format!("{} {} {}\n", r, c, v));
            }
        }
        s
    }
}

//! Minimal row-major dense matrix used in operator tables and hot loops.
//!
//! Factorizations go through nalgebra; the row-major layout keeps per-element
//! mat-vecs cache-friendly without pulling nalgebra types into kernels.

use std::ops::{Index, IndexMut};

#[derive(Debug, Clone)]
pub struct DenseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(i, j)] = m[(i, j)];
            }
        }
        out
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.nrows, self.ncols, |i, j| self[(i, j)])
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            y[i] = acc;
        }
    }

    /// `y += s * A x`.
    pub fn matvec_scaled_add(&self, s: f64, x: &[f64], y: &mut [f64]) {
        for i in 0..self.nrows {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            y[i] += s * acc;
        }
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> DenseMatrix {
        debug_assert_eq!(self.ncols, rhs.nrows);
        let mut out = DenseMatrix::zeros(self.nrows, rhs.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.ncols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// Solve `self * X = B` by pivoted LU with one step of iterative
    /// refinement (setup-time only; the refinement recovers accuracy lost to
    /// the poor conditioning of high-degree Bernstein mass matrices).
    pub fn solve(&self, b: &DenseMatrix) -> Option<DenseMatrix> {
        let a = self.to_nalgebra();
        let bn = b.to_nalgebra();
        let lu = a.clone().lu();
        let mut x = lu.solve(&bn)?;
        for _ in 0..2 {
            let resid = &bn - &a * &x;
            match lu.solve(&resid) {
                Some(dx) => x += dx,
                None => break,
            }
        }
        Some(Self::from_nalgebra(&x))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}

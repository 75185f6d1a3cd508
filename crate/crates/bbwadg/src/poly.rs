//! Fast Bernstein polynomial algebra: sparse multiplication, the
//! degree-elevation decomposition of the polynomial L2 projection with its
//! telescoping apply, and the (ill-conditioned) fast mass inverse.

use crate::bernstein::{elevation_matrix, eval_matrix_rule};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::multi_index::{binomial, space_dim, IndexSet};
use crate::ops_counter;
use crate::quadrature::QuadratureRule;
use crate::sparse::SparseOperator;

/// Product of a degree-`n` and a degree-1 Bernstein polynomial:
/// `c_gamma = sum_j a_{gamma - e_j} b_j gamma_j / (n+1)`.
pub fn multiply_linear(f: &[f64], g: &[f64], n: usize, dim: usize) -> Vec<f64> {
    assert_eq!(f.len(), space_dim(n, dim));
    assert_eq!(g.len(), dim + 1);
    let hi = IndexSet::new(n + 1, dim);
    let lo = IndexSet::new(n, dim);
    // g holds canonical-order degree-1 coefficients; b[j] is the one on e_j.
    let set1 = IndexSet::new(1, dim);
    let mut b = [0.0; 4];
    for (pos, idx) in set1.iter().enumerate() {
        let j = idx.entries().iter().position(|&x| x == 1).unwrap();
        b[j] = g[pos];
    }
    let scale = 1.0 / (n as f64 + 1.0);
    hi.iter()
        .map(|gamma| {
            let mut acc = 0.0;
            for j in 0..=dim {
                if let Some(alpha) = gamma.lowered(j) {
                    acc += f[lo.position(&alpha).unwrap()] * b[j] * gamma.get(j) as f64;
                }
            }
            acc * scale
        })
        .collect()
}

/// Precomputed sparse stencil for multiplying degree-`n` by degree-`m`
/// polynomials. Each output coefficient is a combination of at most
/// `dim(P^m)` products with weights `binom(gamma, beta) / binom(n+m, n)`.
#[derive(Debug, Clone)]
pub struct MultiplicationStencil {
    pub n: usize,
    pub m: usize,
    pub dim: usize,
    row_ptr: Vec<u32>,
    f_idx: Vec<u32>,
    g_idx: Vec<u32>,
    weights: Vec<f64>,
}

impl MultiplicationStencil {
    pub fn new(n: usize, m: usize, dim: usize) -> Self {
        let out = IndexSet::new(n + m, dim);
        let fset = IndexSet::new(n, dim);
        let gset = IndexSet::new(m, dim);
        let denom = binomial(n + m, n);
        let mut row_ptr = vec![0u32];
        let mut f_idx = Vec::new();
        let mut g_idx = Vec::new();
        let mut weights = Vec::new();
        for gamma in out.iter() {
            for (gpos, beta) in gset.iter().enumerate() {
                let mut alpha = *gamma;
                let mut ok = true;
                let mut w = 1.0;
                for j in 0..=dim {
                    let bj = beta.get(j);
                    if gamma.get(j) < bj {
                        ok = false;
                        break;
                    }
                    w *= binomial(gamma.get(j) as usize, bj as usize);
                    for _ in 0..bj {
                        alpha = alpha.lowered(j).unwrap();
                    }
                }
                if !ok {
                    continue;
                }
                f_idx.push(fset.position(&alpha).unwrap() as u32);
                g_idx.push(gpos as u32);
                weights.push(w / denom);
            }
            row_ptr.push(f_idx.len() as u32);
        }
        Self {
            n,
            m,
            dim,
            row_ptr,
            f_idx,
            g_idx,
            weights,
        }
    }

    pub fn output_len(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn madds_per_apply(&self) -> u64 {
        self.weights.len() as u64
    }

    /// Exact Bernstein coefficients of the product `f * g`.
    pub fn apply(&self, f: &[f64], g: &[f64], out: &mut [f64]) -> Result<()> {
        if f.len() != space_dim(self.n, self.dim) || g.len() != space_dim(self.m, self.dim) {
            return Err(Error::DegreeMismatch {
                expected: space_dim(self.n, self.dim),
                got: f.len(),
            });
        }
        debug_assert_eq!(out.len(), self.output_len());
        for r in 0..self.output_len() {
            let lo = self.row_ptr[r] as usize;
            let hi = self.row_ptr[r + 1] as usize;
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.weights[k]
                    * f[self.f_idx[k] as usize]
                    * g[self.g_idx[k] as usize];
            }
            out[r] = acc;
        }
        ops_counter::FAST_MULTIPLY.add(self.madds_per_apply());
        Ok(())
    }

    /// `out += (f * g)` without a temporary.
    pub fn apply_add(&self, f: &[f64], g: &[f64], out: &mut [f64]) {
        for r in 0..self.output_len() {
            let lo = self.row_ptr[r] as usize;
            let hi = self.row_ptr[r + 1] as usize;
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.weights[k]
                    * f[self.f_idx[k] as usize]
                    * g[self.g_idx[k] as usize];
            }
            out[r] += acc;
        }
        ops_counter::FAST_MULTIPLY.add(self.madds_per_apply());
    }
}

/// Solve the triangular eigenvalue-ratio system for the projection
/// decomposition coefficients `c_0..c_N`:
/// `sum_{j=0}^{N-k} c_j lam^{N-j}_k / lam^N_k = lam^{N+M}_k / lam^N_k`.
///
/// `eigs[n]` holds the distinct mass eigenvalues of degree `n`, for
/// `n = 0..=N+M`.
pub fn projection_coeffs(n: usize, m: usize, eigs: &[Vec<f64>]) -> Result<Vec<f64>> {
    assert!(eigs.len() > n + m);
    let mut c = vec![0.0; n + 1];
    for k in (0..=n).rev() {
        let rhs = eigs[n + m][k] / eigs[n][k];
        let mut acc = 0.0;
        for j in 0..n - k {
            acc += c[j] * eigs[n - j][k] / eigs[n][k];
        }
        let pivot = eigs[k][k] / eigs[n][k];
        if pivot.abs() < 1e-300 {
            return Err(Error::SingularPivot(k));
        }
        c[n - k] = (rhs - acc) / pivot;
    }
    Ok(c)
}

/// Coefficients of the fast mass inverse `M^{-1} = sum_j c_j E_j E_j^T`
/// together with its condition number `sum |c_j|`.
pub fn mass_inverse_coeffs(n: usize, eigs: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    assert!(eigs.len() > n);
    let mut c = vec![0.0; n + 1];
    for k in (0..=n).rev() {
        let mut acc = 0.0;
        for j in 0..n - k {
            acc += c[j] * eigs[n - j][k];
        }
        let pivot = eigs[k][k];
        if pivot.abs() < 1e-300 {
            return Err(Error::SingularPivot(k));
        }
        c[n - k] = (1.0 - acc) / pivot;
    }
    let cond = c.iter().map(|x| x.abs()).sum();
    Ok((c, cond))
}

/// Direct quadrature-built dense projection `P^{N+M}_N` (test oracle and
/// reference path): `M_N^{-1}` times the mixed mass between degree-N and
/// degree-(N+M) bases.
pub fn projection_direct(n: usize, m: usize, dim: usize, rule: &QuadratureRule) -> DenseMatrix {
    assert!(rule.exactness >= 2 * n + m);
    let vn = eval_matrix_rule(n, dim, rule);
    let vh = eval_matrix_rule(n + m, dim, rule);
    let np = vn.ncols;
    let nq = rule.len();
    let mut vtw = DenseMatrix::zeros(np, nq);
    for q in 0..nq {
        for i in 0..np {
            vtw[(i, q)] = vn[(q, i)] * rule.weights[q];
        }
    }
    let mass = vtw.matmul(&vn);
    let mixed = vtw.matmul(&vh);
    mass.solve(&mixed).expect("mass is SPD")
}

/// The projection `P^{N+M}_N` in telescoped form: `M` one-degree reductions
/// bring the input to degree `N`, then a downward reduction sweep captures
/// `c_j`-scaled copies and an upward elevation sweep accumulates them.
/// Per-degree sweep buffers reused across telescoping applies.
pub struct TelescopeWork {
    levels: Vec<Vec<f64>>,
    captures: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ProjectionDecomposition {
    pub n: usize,
    pub m: usize,
    pub dim: usize,
    pub coeffs: Vec<f64>,
    /// One-degree reductions (transposed elevations) from degree i+1 to i,
    /// for i = 0..n+m-1; entry i maps dim(P^{i+1}) to dim(P^i).
    reductions: Vec<SparseOperator>,
    /// One-degree elevations from degree i to i+1, for i = 0..n-1.
    elevations: Vec<SparseOperator>,
    madds: u64,
}

impl ProjectionDecomposition {
    pub fn new(n: usize, m: usize, dim: usize, eigs: &[Vec<f64>]) -> Result<Self> {
        let coeffs = projection_coeffs(n, m, eigs)?;
        let mut reductions = Vec::with_capacity(n + m);
        let mut elevations = Vec::with_capacity(n);
        for i in 0..n + m {
            let e = elevation_matrix(i, dim);
            if i < n {
                elevations.push(e.clone());
            }
            reductions.push(e.transpose());
        }
        let mut madds = 0u64;
        for r in reductions.iter().skip(n) {
            madds += r.nnz() as u64; // initial M reductions
        }
        for i in 0..n {
            madds += reductions[i].nnz() as u64; // downward sweep
            madds += elevations[i].nnz() as u64; // upward sweep
            madds += space_dim(i, dim) as u64; // capture scaling
            madds += space_dim(i + 1, dim) as u64; // accumulate
        }
        madds += space_dim(n, dim) as u64; // c_0 capture
        Ok(Self {
            n,
            m,
            dim,
            coeffs,
            reductions,
            elevations,
            madds,
        })
    }

    pub fn madds_per_apply(&self) -> u64 {
        self.madds
    }

    pub fn work(&self) -> TelescopeWork {
        TelescopeWork {
            levels: (0..=self.n + self.m)
                .map(|deg| vec![0.0; space_dim(deg, self.dim)])
                .collect(),
            captures: (0..=self.n)
                .map(|j| vec![0.0; space_dim(self.n - j, self.dim)])
                .collect(),
        }
    }

    /// Apply to degree-(n+m) coefficients, producing degree-n coefficients.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        let mut work = self.work();
        self.apply_with(u, out, &mut work)
    }

    /// Allocation-free apply with caller-provided work buffers.
    pub fn apply_with(&self, u: &[f64], out: &mut [f64], work: &mut TelescopeWork) -> Result<()> {
        let (n, m, dim) = (self.n, self.m, self.dim);
        if u.len() != space_dim(n + m, dim) {
            return Err(Error::DegreeMismatch {
                expected: space_dim(n + m, dim),
                got: u.len(),
            });
        }
        // Reduce to degree n.
        work.levels[n + m].copy_from_slice(u);
        for i in (n..n + m).rev() {
            let (lo, hi) = work.levels.split_at_mut(i + 1);
            self.reductions[i].apply(&hi[0], &mut lo[i]);
        }
        // Downward sweep: captures[j] = c_j * (reduced to degree n - j).
        for (cap, src) in work.captures[0].iter_mut().zip(&work.levels[n]) {
            *cap = self.coeffs[0] * src;
        }
        for i in (1..=n).rev() {
            let (lo, hi) = work.levels.split_at_mut(i);
            self.reductions[i - 1].apply(&hi[0], &mut lo[i - 1]);
            for (cap, src) in work.captures[n - i + 1].iter_mut().zip(&lo[i - 1]) {
                *cap = self.coeffs[n - i + 1] * src;
            }
        }
        // Upward sweep reuses the level buffers as accumulators.
        work.levels[0].copy_from_slice(&work.captures[n]);
        for i in 1..=n {
            let (lo, hi) = work.levels.split_at_mut(i);
            self.elevations[i - 1].apply(&lo[i - 1], &mut hi[0]);
            for (a, b) in hi[0].iter_mut().zip(&work.captures[n - i]) {
                *a += b;
            }
        }
        out.copy_from_slice(&work.levels[n]);
        ops_counter::FAST_PROJECT.add(self.madds);
        Ok(())
    }

    /// Dense reconstruction (columns of the telescoped map); test oracle use.
    pub fn to_dense(&self) -> DenseMatrix {
        let rows = space_dim(self.n, self.dim);
        let cols = space_dim(self.n + self.m, self.dim);
        let mut out = DenseMatrix::zeros(rows, cols);
        let mut e = vec![0.0; cols];
        let mut col = vec![0.0; rows];
        for j in 0..cols {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.apply(&e, &mut col).unwrap();
            for i in 0..rows {
                out[(i, j)] = col[i];
            }
        }
        out
    }
}

/// Fast mass inverse applied via the same telescoping sweeps (no trailing
/// reduction chain). Kept for the roundoff study; never used in the solver.
pub fn apply_mass_inverse_decomposed(
    n: usize,
    dim: usize,
    coeffs: &[f64],
    b: &[f64],
) -> Vec<f64> {
    let mut reductions = Vec::with_capacity(n);
    let mut elevations = Vec::with_capacity(n);
    for i in 0..n {
        let e = elevation_matrix(i, dim);
        reductions.push(e.transpose());
        elevations.push(e);
    }
    let mut captures: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    captures.push(b.iter().map(|&v| coeffs[0] * v).collect());
    let mut cur = b.to_vec();
    for i in (1..=n).rev() {
        let mut next = vec![0.0; space_dim(i - 1, dim)];
        reductions[i - 1].apply(&cur, &mut next);
        captures.push(next.iter().map(|&v| coeffs[n - i + 1] * v).collect());
        cur = next;
    }
    let mut acc = captures[n].clone();
    for i in 1..=n {
        let mut next = vec![0.0; space_dim(i, dim)];
        elevations[i - 1].apply(&acc, &mut next);
        for (a, c) in next.iter_mut().zip(&captures[n - i]) {
            *a += c;
        }
        acc = next;
    }
    acc
}

/// One row of the mass-inverse roundoff comparison.
#[derive(Debug, Clone)]
pub struct RoundoffRow {
    pub n: usize,
    pub cond: f64,
    pub residual_decomposed: f64,
    pub residual_direct: f64,
}

/// For `b = M e` (e all ones), compare `||sum_j c_j E E^T b - e||_inf` against
/// the residual of a direct LU solve.
pub fn roundoff_study(n_range: impl Iterator<Item = usize>, dim: usize) -> Result<Vec<RoundoffRow>> {
    let mut out = Vec::new();
    let mut max_n = 0;
    let ns: Vec<usize> = n_range.collect();
    for &n in &ns {
        max_n = max_n.max(n);
    }
    let eigs = crate::bernstein::eigenvalue_table(max_n, dim)?;
    for n in ns {
        let tab = crate::bernstein::BasisTables::build(n, dim)?;
        let np = space_dim(n, dim);
        let e = vec![1.0; np];
        let mut b = vec![0.0; np];
        tab.mass.matvec(&e, &mut b);
        let (coeffs, cond) = mass_inverse_coeffs(n, &eigs)?;
        let decomposed = apply_mass_inverse_decomposed(n, dim, &coeffs, &b);
        let residual_decomposed = decomposed
            .iter()
            .map(|&v| (v - 1.0).abs())
            .fold(0.0, f64::max);
        let bmat = DenseMatrix {
            nrows: np,
            ncols: 1,
            data: b.clone(),
        };
        let direct = tab.mass.solve(&bmat).expect("mass is SPD");
        let residual_direct = direct
            .data
            .iter()
            .map(|&v| (v - 1.0).abs())
            .fold(0.0, f64::max);
        out.push(RoundoffRow {
            n,
            cond,
            residual_decomposed,
            residual_direct,
        });
    }
    Ok(out)
}

//! Factorized Bernstein lift operators `L^f = E^f_L L_0`.
//!
//! Volume coefficients split into slices by the barycentric exponent opposite
//! the face. Slice `l` of the lift equals a scalar `(-1)^l binom(N,l)/(1+l)`
//! times the `l`-fold one-degree face reduction of the fixed-bandwidth kernel
//! `L_0` applied to the face data, so one face costs a chain of `N` sparse
//! face reductions plus one sparse `N_p^f x N_p^f` product.

use crate::bernstein::eval_matrix_rule;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::multi_index::{binomial, multinomial, space_dim, IndexSet};
use crate::quadrature::QuadratureRule;
use crate::simplex::ReferenceSimplex;
use crate::sparse::SparseOperator;

/// Per-level face sweep buffers reused across lift applies.
pub struct LiftWork {
    levels: Vec<Vec<f64>>,
}

/// Reference-element lift tables shared by every element.
#[derive(Debug, Clone)]
pub struct LiftFactorization {
    pub n: usize,
    pub dim: usize,
    /// Fixed-bandwidth face kernel; at most 7 nonzeros per row for d = 3.
    pub l0: SparseOperator,
    /// One-degree face reductions, entry `i` mapping face degree `i+1` to `i`.
    reductions: Vec<SparseOperator>,
    /// Per-slice scalars `(-1)^l binom(N,l) / (1+l)`.
    pub slice_scalars: Vec<f64>,
    /// `positions[m][l]` lists volume coefficient positions of slice `l` of
    /// face `m`, ordered like the face index set of degree `N - l`.
    positions: Vec<Vec<Vec<u32>>>,
    madds: u64,
}

impl LiftFactorization {
    pub fn new(n: usize, dim: usize) -> Result<Self> {
        let fdim = dim - 1;
        let l0 = face_kernel(n, dim)?;
        let mut reductions = Vec::with_capacity(n);
        for i in 0..n {
            reductions.push(crate::bernstein::elevation_matrix(i, fdim).transpose());
        }
        let slice_scalars: Vec<f64> = (0..=n)
            .map(|l| {
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                sign * binomial(n, l) / (1.0 + l as f64)
            })
            .collect();

        let vol = IndexSet::new(n, dim);
        let simp = ReferenceSimplex::new(dim);
        let mut positions = Vec::with_capacity(simp.num_faces());
        for m in 0..simp.num_faces() {
            let mut per_slice = Vec::with_capacity(n + 1);
            for l in 0..=n {
                let fset = IndexSet::new(n - l, fdim);
                let mut slots = vec![0u32; fset.len()];
                for (vp, a) in vol.iter().enumerate() {
                    if a.get(m) as usize == l {
                        let fa = a.drop_position(m);
                        slots[fset.position(&fa).unwrap()] = vp as u32;
                    }
                }
                per_slice.push(slots);
            }
            positions.push(per_slice);
        }

        let mut madds = l0.nnz() as u64;
        for r in &reductions {
            madds += r.nnz() as u64;
        }
        for l in 0..=n {
            madds += space_dim(n - l, fdim) as u64; // scaled scatter
        }

        Ok(Self {
            n,
            dim,
            l0,
            reductions,
            slice_scalars,
            positions,
            madds,
        })
    }

    pub fn face_dofs(&self) -> usize {
        space_dim(self.n, self.dim - 1)
    }

    pub fn madds_per_face(&self) -> u64 {
        self.madds
    }

    /// Volume coefficient positions of face `m`'s own trace (slice 0).
    pub fn trace_positions(&self, m: usize) -> &[u32] {
        &self.positions[m][0]
    }

    pub fn work(&self) -> LiftWork {
        LiftWork {
            levels: (0..=self.n)
                .map(|l| vec![0.0; space_dim(self.n - l, self.dim - 1)])
                .collect(),
        }
    }

    /// `out += scale * L^f g` for face `m` of the reference element.
    pub fn apply_add(&self, m: usize, g: &[f64], scale: f64, out: &mut [f64]) {
        let mut work = self.work();
        self.apply_add_with(m, g, scale, out, &mut work);
    }

    /// Allocation-free apply with caller-provided sweep buffers.
    pub fn apply_add_with(
        &self,
        m: usize,
        g: &[f64],
        scale: f64,
        out: &mut [f64],
        work: &mut LiftWork,
    ) {
        let n = self.n;
        self.l0.apply(g, &mut work.levels[0]);
        for l in 0..=n {
            let s = scale * self.slice_scalars[l];
            let cur = &work.levels[l];
            for (slot, &vp) in self.positions[m][l].iter().enumerate() {
                out[vp as usize] += s * cur[slot];
            }
            if l < n {
                let (lo, hi) = work.levels.split_at_mut(l + 1);
                self.reductions[n - l - 1].apply(&lo[l], &mut hi[0]);
            }
        }
    }

    /// Dense `N_p x N_p^f` reconstruction (test oracle use).
    pub fn to_dense(&self, m: usize) -> DenseMatrix {
        let np = space_dim(self.n, self.dim);
        let npf = self.face_dofs();
        let mut out = DenseMatrix::zeros(np, npf);
        let mut g = vec![0.0; npf];
        let mut col = vec![0.0; np];
        for j in 0..npf {
            g.iter_mut().for_each(|v| *v = 0.0);
            g[j] = 1.0;
            col.iter_mut().for_each(|v| *v = 0.0);
            self.apply_add(m, &g, 1.0, &mut col);
            for i in 0..np {
                out[(i, j)] = col[i];
            }
        }
        out
    }
}

/// Closed-form fixed-bandwidth kernel: with face indices `alpha` of degree
/// `n` on the (d-1)-simplex,
/// diagonal entries are `(sum_i alpha_i (alpha_i + 1) + n + d) / 2` and the
/// entry at `alpha -> alpha - e_i + e_j` is `alpha_i (alpha_j + 1) / 2`.
fn face_kernel(n: usize, dim: usize) -> Result<SparseOperator> {
    let fdim = dim - 1;
    let fset = IndexSet::new(n, fdim);
    let rows: Vec<Vec<(usize, f64)>> = fset
        .iter()
        .map(|alpha| {
            let mut row = Vec::with_capacity(7);
            let diag: f64 = alpha
                .entries()
                .iter()
                .map(|&a| (a as f64) * (a as f64 + 1.0))
                .sum::<f64>()
                + (n + dim) as f64;
            row.push((fset.position(alpha).unwrap(), diag / 2.0));
            for i in 0..=fdim {
                if alpha.get(i) == 0 {
                    continue;
                }
                for j in 0..=fdim {
                    if i == j {
                        continue;
                    }
                    let b = alpha.lowered(i).unwrap().raised(j);
                    let val = alpha.get(i) as f64 * b.get(j) as f64 / 2.0;
                    row.push((fset.position(&b).unwrap(), val));
                }
            }
            row.sort_by_key(|&(c, _)| c);
            row
        })
        .collect();
    let op = SparseOperator::from_rows(fset.len(), &rows);
    let limit = if dim == 3 { 7 } else { 3 };
    let nnz = op.max_nnz_per_row();
    if nnz > limit {
        return Err(Error::SparsityViolation { nnz, limit });
    }
    Ok(op)
}

/// Face mass matrix between the volume basis and the face basis, with the
/// face parametrized over the bi-unit face simplex.
pub fn face_mass(n: usize, dim: usize, m: usize) -> DenseMatrix {
    let fdim = dim - 1;
    let simp = ReferenceSimplex::new(dim);
    let face_rule = QuadratureRule::face(dim, 2 * n + 2);
    let vset = IndexSet::new(n, dim);
    let fset = IndexSet::new(n, fdim);
    let fverts = simp.face_vertices(m);
    let face_v = eval_matrix_rule(n, fdim, &face_rule);
    let mut mf = DenseMatrix::zeros(vset.len(), fset.len());
    for (q, flam) in face_rule.bary.iter().enumerate() {
        let mut lam = [0.0f64; 4];
        for (slot, &v) in fverts.iter().enumerate() {
            lam[v] = flam[slot];
        }
        for (i, a) in vset.iter().enumerate() {
            let mut prod = multinomial(a) * face_rule.weights[q];
            for t in 0..=dim {
                prod *= lam[t].powi(a.get(t) as i32);
            }
            if prod == 0.0 {
                continue;
            }
            for j in 0..fset.len() {
                mf[(i, j)] += prod * face_v[(q, j)];
            }
        }
    }
    mf
}

/// Dense reference lift `M^{-1} M_f` for face `m`. Test oracle for the
/// factorized path.
pub fn dense_lift(n: usize, dim: usize, m: usize) -> DenseMatrix {
    let mf = face_mass(n, dim, m);
    let mass = crate::bernstein::mass_matrix_closed(n, dim);
    mass.solve(&mf).expect("mass is SPD")
}

//! Bernstein basis on the reference simplex: evaluation, degree elevation,
//! the Bernstein/modal transform with mass-matrix eigenvalues, and sparse
//! barycentric derivative operators.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::multi_index::{multinomial, IndexSet};
use crate::quadrature::QuadratureRule;
use crate::simplex::ReferenceSimplex;
use crate::sparse::SparseOperator;

const BARY_SUM_TOL: f64 = 1e-12;

/// Evaluate all degree-`n` Bernstein basis functions at the given barycentric
/// points: entry `(q, alpha) = C_alpha * prod(lambda_i^alpha_i)`.
pub fn eval_bernstein(n: usize, dim: usize, bary: &[[f64; 4]]) -> Result<DenseMatrix> {
    for lam in bary {
        let sum: f64 = lam[..=dim].iter().sum();
        if (sum - 1.0).abs() > BARY_SUM_TOL {
            return Err(Error::BadBarycentric((sum - 1.0).abs()));
        }
    }
    Ok(eval_unchecked(n, dim, bary))
}

fn eval_unchecked(n: usize, dim: usize, bary: &[[f64; 4]]) -> DenseMatrix {
    let set = IndexSet::new(n, dim);
    let mut v = DenseMatrix::zeros(bary.len(), set.len());
    for (col, a) in set.iter().enumerate() {
        let c = multinomial(a);
        for (q, lam) in bary.iter().enumerate() {
            let mut prod = c;
            for (i, &ai) in a.entries().iter().enumerate() {
                prod *= lam[i].powi(ai as i32);
            }
            v[(q, col)] = prod;
        }
    }
    v
}

/// Bernstein Vandermonde at a quadrature rule's points (points pre-validated).
pub fn eval_matrix_rule(n: usize, dim: usize, rule: &QuadratureRule) -> DenseMatrix {
    eval_unchecked(n, dim, &rule.bary)
}

/// Bernstein mass matrix from closed-form simplex moments:
/// `M[a,b] = C_a C_b V d! prod((a_i + b_i)!) / (d + 2n)!`.
///
/// Entry-wise exact up to f64 rounding; used where the quadrature-assembled
/// version's conditioning would pollute a solve.
pub fn mass_matrix_closed(n: usize, dim: usize) -> DenseMatrix {
    use crate::multi_index::factorial;
    let set = IndexSet::new(n, dim);
    let v = ReferenceSimplex::new(dim).measure();
    let np = set.len();
    let base = v * factorial(dim) / factorial(dim + 2 * n);
    let mut m = DenseMatrix::zeros(np, np);
    for (i, a) in set.iter().enumerate() {
        let ca = multinomial(a);
        for (j, b) in set.iter().enumerate() {
            if j < i {
                continue;
            }
            let cb = multinomial(b);
            let mut prod = base * ca * cb;
            for k in 0..=dim {
                prod *= factorial((a.get(k) + b.get(k)) as usize);
            }
            m[(i, j)] = prod;
            m[(j, i)] = prod;
        }
    }
    m
}

/// One-degree elevation: maps degree-`n_from` coefficients to degree-`n_from+1`
/// coefficients of the same polynomial. Entry at `(beta, beta - e_j)` is
/// `beta_j / (n_from + 1)`; at most `d+1` nonzeros per row and column.
pub fn elevation_matrix(n_from: usize, dim: usize) -> SparseOperator {
    let hi = IndexSet::new(n_from + 1, dim);
    let lo = IndexSet::new(n_from, dim);
    let scale = 1.0 / (n_from as f64 + 1.0);
    let rows: Vec<Vec<(usize, f64)>> = hi
        .iter()
        .map(|beta| {
            let mut row = Vec::with_capacity(dim + 1);
            for j in 0..=dim {
                if let Some(alpha) = beta.lowered(j) {
                    row.push((lo.position(&alpha).unwrap(), beta.get(j) as f64 * scale));
                }
            }
            row
        })
        .collect();
    SparseOperator::from_rows(lo.len(), &rows)
}

/// Dense elevation chain `E^{n_to}_{n_from}`; identity when degrees match.
pub fn elevation_chain(n_from: usize, n_to: usize, dim: usize) -> DenseMatrix {
    assert!(n_to >= n_from);
    let mut chain = DenseMatrix::identity(crate::multi_index::space_dim(n_from, dim));
    for n in n_from..n_to {
        chain = elevation_matrix(n, dim).to_dense_rowmajor().matmul(&chain);
    }
    chain
}

impl SparseOperator {
    fn to_dense_rowmajor(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }
}

// ---------------------------------------------------------------------------
// Orthonormal hierarchical (Dubiner) modal basis
// ---------------------------------------------------------------------------

/// Orthonormal Jacobi polynomial `P~_j^{(alpha,0)}(x)` values for j = 0..=n.
fn jacobi_orthonormal(x: f64, alpha: f64, n: usize) -> Vec<f64> {
    let beta = 0.0f64;
    let mut p = Vec::with_capacity(n + 1);
    let gamma0 = 2.0f64.powf(alpha + beta + 1.0) / (alpha + beta + 1.0)
        * gamma_fac(alpha + 1.0)
        * gamma_fac(beta + 1.0)
        / gamma_fac(alpha + beta + 1.0);
    p.push(1.0 / gamma0.sqrt());
    if n == 0 {
        return p;
    }
    let gamma1 = (alpha + 1.0) * (beta + 1.0) / (alpha + beta + 3.0) * gamma0;
    p.push(((alpha + beta + 2.0) * x / 2.0 + (alpha - beta) / 2.0) / gamma1.sqrt());
    let mut aold = 2.0 / (2.0 + alpha + beta)
        * ((alpha + 1.0) * (beta + 1.0) / (alpha + beta + 3.0)).sqrt();
    for i in 1..n {
        let i = i as f64;
        let h1 = 2.0 * i + alpha + beta;
        let anew = 2.0 / (h1 + 2.0)
            * ((i + 1.0) * (i + 1.0 + alpha + beta) * (i + 1.0 + alpha) * (i + 1.0 + beta)
                / (h1 + 1.0)
                / (h1 + 3.0))
                .sqrt();
        let bnew = -(alpha * alpha - beta * beta) / h1 / (h1 + 2.0);
        let next = ((x - bnew) * p[p.len() - 1] - aold * p[p.len() - 2]) / anew;
        p.push(next);
        aold = anew;
    }
    p
}

fn gamma_fac(x: f64) -> f64 {
    let n = x.round() as usize;
    debug_assert!((x - n as f64).abs() < 1e-12 && n >= 1);
    crate::multi_index::factorial(n - 1)
}

/// Modal basis values at reference points, columns ordered by ascending total
/// degree. Returns the matrix and each column's total degree.
pub fn eval_modal(n: usize, dim: usize, points: &[[f64; 3]]) -> (DenseMatrix, Vec<usize>) {
    let mut order: Vec<[usize; 3]> = Vec::new();
    if dim == 2 {
        for i in 0..=n {
            for j in 0..=n - i {
                order.push([i, j, 0]);
            }
        }
    } else {
        for i in 0..=n {
            for j in 0..=n - i {
                for k in 0..=n - i - j {
                    order.push([i, j, k]);
                }
            }
        }
    }
    order.sort_by_key(|m| (m[0] + m[1] + m[2], m[1] + m[2], m[2]));
    let degrees: Vec<usize> = order.iter().map(|m| m[0] + m[1] + m[2]).collect();

    let mut v = DenseMatrix::zeros(points.len(), order.len());
    for (q, pt) in points.iter().enumerate() {
        if dim == 2 {
            let (r, s) = (pt[0], pt[1]);
            let a = if (1.0 - s).abs() > 1e-12 {
                2.0 * (1.0 + r) / (1.0 - s) - 1.0
            } else {
                -1.0
            };
            let b = s;
            let pa = jacobi_orthonormal(a, 0.0, n);
            for (col, m) in order.iter().enumerate() {
                let (i, j) = (m[0], m[1]);
                let pb = jacobi_orthonormal(b, 2.0 * i as f64 + 1.0, j);
                v[(q, col)] = 2.0f64.sqrt() * pa[i] * pb[j] * (1.0 - b).powi(i as i32);
            }
        } else {
            let (r, s, t) = (pt[0], pt[1], pt[2]);
            let a = if (s + t).abs() > 1e-12 {
                -2.0 * (1.0 + r) / (s + t) - 1.0
            } else {
                -1.0
            };
            let b = if (1.0 - t).abs() > 1e-12 {
                2.0 * (1.0 + s) / (1.0 - t) - 1.0
            } else {
                -1.0
            };
            let c = t;
            let pa = jacobi_orthonormal(a, 0.0, n);
            for (col, m) in order.iter().enumerate() {
                let (i, j, k) = (m[0], m[1], m[2]);
                let pb = jacobi_orthonormal(b, 2.0 * i as f64 + 1.0, j);
                let pc = jacobi_orthonormal(c, 2.0 * (i + j) as f64 + 2.0, k);
                v[(q, col)] = 2.0 * 2.0f64.sqrt()
                    * pa[i]
                    * pb[j]
                    * (1.0 - b).powi(i as i32)
                    * pc[k]
                    * (1.0 - c).powi((i + j) as i32);
            }
        }
    }
    (v, degrees)
}

// ---------------------------------------------------------------------------
// Basis tables
// ---------------------------------------------------------------------------

/// Degree-`n` reference-element tables: modal transform, mass matrix, its
/// distinct eigenvalues, and sparse derivative operators.
#[derive(Debug, Clone)]
pub struct BasisTables {
    pub n: usize,
    pub dim: usize,
    pub indices: IndexSet,
    /// Modal-to-Bernstein coefficient transform `T_N` (`c_B = T c_L`).
    pub modal_transform: DenseMatrix,
    /// Bernstein mass matrix on the reference simplex.
    pub mass: DenseMatrix,
    /// Distinct mass eigenvalues by modal degree, strictly decreasing.
    pub eigenvalues: Vec<f64>,
    /// Barycentric derivative operators `D^0..D^d`, at most d+1 nonzeros/row.
    pub deriv_bary: Vec<SparseOperator>,
    /// Reference-coordinate derivative operators `D_r, D_s(, D_t)`.
    pub deriv_ref: Vec<SparseOperator>,
}

impl BasisTables {
    /// Build with a quadrature rule exact to at least degree `2n`.
    pub fn new(n: usize, dim: usize, rule: &QuadratureRule) -> Result<Self> {
        assert!(rule.exactness >= 2 * n, "rule must be exact to 2N");
        let indices = IndexSet::new(n, dim);
        let np = indices.len();
        let vb = eval_matrix_rule(n, dim, rule);
        let (vl, degrees) = eval_modal(n, dim, &rule.points);

        // M = Vb^T W Vb and X = Vb^T W Vl, then T = M^{-1} X.
        let nq = rule.len();
        let mut vtw = DenseMatrix::zeros(np, nq);
        for q in 0..nq {
            for i in 0..np {
                vtw[(i, q)] = vb[(q, i)] * rule.weights[q];
            }
        }
        let mass = vtw.matmul(&vb);
        let x = vtw.matmul(&vl);
        let t = mass.solve(&x).expect("mass is SPD");

        // T^{-1} M T must be diagonal with constant blocks per modal degree.
        let tn = t.to_nalgebra();
        let t_lu = tn.clone().lu();
        let mt = mass.to_nalgebra() * &tn;
        let diag_full = t_lu.solve(&mt).expect("T invertible");
        let mut eigenvalues = vec![0.0; n + 1];
        let mut counts = vec![0usize; n + 1];
        for (i, &k) in degrees.iter().enumerate() {
            eigenvalues[k] += diag_full[(i, i)];
            counts[k] += 1;
        }
        for k in 0..=n {
            eigenvalues[k] /= counts[k] as f64;
        }
        for (i, &k) in degrees.iter().enumerate() {
            let spread = (diag_full[(i, i)] - eigenvalues[k]).abs();
            if spread > 1e-9 * eigenvalues[k].abs().max(1.0) {
                return Err(Error::ModalOrdering { degree: k, spread });
            }
        }

        let deriv_bary: Vec<SparseOperator> =
            (0..=dim).map(|i| derivative_stencil(n, dim, i)).collect();
        let simp = ReferenceSimplex::new(dim);
        let deriv_ref = (0..dim)
            .map(|r| {
                let rows: Vec<Vec<(usize, f64)>> = (0..np)
                    .map(|row| {
                        let mut acc: std::collections::BTreeMap<usize, f64> =
                            std::collections::BTreeMap::new();
                        for i in 0..=dim {
                            let g = simp.barycentric_gradient(i)[r];
                            if g == 0.0 {
                                continue;
                            }
                            for (c, v) in deriv_bary[i].row(row) {
                                *acc.entry(c).or_insert(0.0) += g * v;
                            }
                        }
                        acc.into_iter().filter(|&(_, v)| v != 0.0).collect()
                    })
                    .collect();
                SparseOperator::from_rows(np, &rows)
            })
            .collect();

        Ok(Self {
            n,
            dim,
            indices,
            modal_transform: t,
            mass,
            eigenvalues,
            deriv_bary,
            deriv_ref,
        })
    }

    /// Convenience constructor with the default 2N+1 rule.
    pub fn build(n: usize, dim: usize) -> Result<Self> {
        Self::new(n, dim, &QuadratureRule::simplex(dim, 2 * n + 1 + 1))
    }
}

/// Barycentric derivative operator `D^i` in exact sparse form:
/// `(D^i a)_gamma = sum_j gamma_j a_{gamma - e_j + e_i}`.
///
/// This equals `M^{-1} S_i` (the numerically assembled version is kept as a
/// test oracle); each row has at most d+1 nonzeros.
fn derivative_stencil(n: usize, dim: usize, i: usize) -> SparseOperator {
    let set = IndexSet::new(n, dim);
    let rows: Vec<Vec<(usize, f64)>> = set
        .iter()
        .map(|gamma| {
            let mut acc: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
            for j in 0..=dim {
                if let Some(shifted) = gamma.lowered(j).map(|g| g.raised(i)) {
                    let pos = set.position(&shifted).unwrap();
                    *acc.entry(pos).or_insert(0.0) += gamma.get(j) as f64;
                }
            }
            acc.into_iter().collect()
        })
        .collect();
    let op = SparseOperator::from_rows(set.len(), &rows);
    debug_assert!(op.max_nnz_per_row() <= dim + 1);
    op
}

/// Eigenvalue tables for degrees `0..=n_max`, reused by the coefficient solves.
pub fn eigenvalue_table(n_max: usize, dim: usize) -> Result<Vec<Vec<f64>>> {
    (0..=n_max)
        .map(|n| Ok(BasisTables::build(n, dim)?.eigenvalues))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multi_index::space_dim;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_bary(dim: usize, rng: &mut impl Rng) -> [f64; 4] {
        // Interior points via normalized exponentials.
        let mut lam = [0.0; 4];
        let mut sum = 0.0;
        for l in lam.iter_mut().take(dim + 1) {
            *l = -(rng.random::<f64>().max(1e-12)).ln();
            sum += *l;
        }
        for l in lam.iter_mut().take(dim + 1) {
            *l /= sum;
        }
        lam
    }

    #[test]
    fn vertex_rows_are_canonical() {
        let simp = ReferenceSimplex::new(3);
        let verts = simp.vertices();
        let bary: Vec<[f64; 4]> = verts.iter().map(|v| simp.barycentric(&v[..3])).collect();
        let v = eval_bernstein(1, 3, &bary).unwrap();
        for (q, _) in verts.iter().enumerate() {
            for col in 0..4 {
                let set = IndexSet::new(1, 3);
                let expect = if set.index(col).get(q) == 1 { 1.0 } else { 0.0 };
                assert!((v[(q, col)] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn partition_of_unity_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in 2..=3 {
            for n in 1..=8 {
                let pts: Vec<[f64; 4]> = (0..100).map(|_| random_bary(dim, &mut rng)).collect();
                let v = eval_bernstein(n, dim, &pts).unwrap();
                for q in 0..pts.len() {
                    let sum: f64 = (0..v.ncols).map(|c| v[(q, c)]).sum();
                    assert!((sum - 1.0).abs() < 1e-13, "n={n} d={dim}: {sum}");
                    for c in 0..v.ncols {
                        assert!(v[(q, c)] >= -1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn centroid_value_matches_direct_evaluation() {
        // N=2, d=2, middle basis function at the centroid: 2 * (1/3)(1/3) = 2/9.
        let set = IndexSet::new(2, 2);
        let target = crate::multi_index::MultiIndex::new(&[1, 1, 0]);
        let col = set.position(&target).unwrap();
        let v = eval_bernstein(2, 2, &[[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]]).unwrap();
        assert!((v[(0, col)] - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_barycentric_point() {
        assert!(eval_bernstein(2, 2, &[[0.5, 0.5, 0.1, 0.0]]).is_err());
    }

    #[test]
    fn elevation_preserves_constants_and_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in 2..=3 {
            for n in 0..=6 {
                let e = elevation_matrix(n, dim);
                assert!(e.max_nnz_per_row() <= dim + 1);
                let ones = vec![1.0; space_dim(n, dim)];
                let mut up = vec![0.0; space_dim(n + 1, dim)];
                e.apply(&ones, &mut up);
                assert!(up.iter().all(|&v| (v - 1.0).abs() < 1e-14));

                let coef: Vec<f64> = (0..space_dim(n, dim))
                    .map(|_| rng.random::<f64>() - 0.5)
                    .collect();
                let mut lifted = vec![0.0; space_dim(n + 1, dim)];
                e.apply(&coef, &mut lifted);
                let pts: Vec<[f64; 4]> = (0..50).map(|_| random_bary(dim, &mut rng)).collect();
                let vlo = eval_bernstein(n, dim, &pts).unwrap();
                let vhi = eval_bernstein(n + 1, dim, &pts).unwrap();
                for q in 0..pts.len() {
                    let a: f64 = (0..vlo.ncols).map(|c| vlo[(q, c)] * coef[c]).sum();
                    let b: f64 = (0..vhi.ncols).map(|c| vhi[(q, c)] * lifted[c]).sum();
                    assert!((a - b).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn elevation_columns_sparse() {
        // Columns correspond to lower-degree indices; each elevates into
        // exactly d+1 higher-degree coefficients.
        for dim in 2..=3 {
            let e = elevation_matrix(4, dim).transpose();
            assert_eq!(e.max_nnz_per_row(), dim + 1);
        }
    }

    #[test]
    fn elevation_chain_matches_composition_and_identity() {
        let id = elevation_chain(3, 3, 2);
        for i in 0..id.nrows {
            for j in 0..id.ncols {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(id[(i, j)], expect);
            }
        }
        let chain = elevation_chain(2, 4, 3);
        let e32 = elevation_matrix(2, 3).to_dense_rowmajor();
        let e43 = elevation_matrix(3, 3).to_dense_rowmajor();
        let prod = e43.matmul(&e32);
        for i in 0..chain.nrows {
            for j in 0..chain.ncols {
                assert!((chain[(i, j)] - prod[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn modal_transform_orthonormal_and_diagonalizing() {
        for dim in 2..=3 {
            for n in 1..=6 {
                let tab = BasisTables::build(n, dim).unwrap();
                let t = tab.modal_transform.to_nalgebra();
                let m = tab.mass.to_nalgebra();
                let gram = t.transpose() * &m * &t;
                let mut worst = 0.0f64;
                for i in 0..gram.nrows() {
                    for j in 0..gram.ncols() {
                        let expect = if i == j { 1.0 } else { 0.0 };
                        worst = worst.max((gram[(i, j)] - expect).abs());
                    }
                }
                assert!(worst < 1e-10, "orthonormality n={n} d={dim}: {worst}");

                // T^{-1} M^{-1} T diagonal: equivalent to T^{-1} M T diagonal.
                let d = t.clone().lu().solve(&(m * &t)).unwrap();
                let mut off = 0.0f64;
                for i in 0..d.nrows() {
                    for j in 0..d.ncols() {
                        if i != j {
                            off = off.max(d[(i, j)].abs());
                        }
                    }
                }
                assert!(off < 1e-10, "diagonalization n={n} d={dim}: {off}");
            }
        }
    }

    #[test]
    fn eigenvalues_strictly_decreasing_and_match_dense_eigensolve() {
        for dim in 2..=3 {
            let tab = BasisTables::build(4, dim).unwrap();
            for k in 1..tab.eigenvalues.len() {
                assert!(tab.eigenvalues[k] < tab.eigenvalues[k - 1]);
            }
            // Brute-force oracle: dense symmetric eigendecomposition of M.
            let eig = nalgebra::SymmetricEigen::new(tab.mass.to_nalgebra());
            let mut dense: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            dense.sort_by(|a, b| b.partial_cmp(a).unwrap());
            dense.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * b.abs().max(1e-30));
            assert_eq!(dense.len(), tab.eigenvalues.len());
            for (a, b) in dense.iter().zip(&tab.eigenvalues) {
                assert!((a - b).abs() < 1e-11 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn degree_zero_mass_is_reference_measure() {
        for dim in 2..=3 {
            let tab = BasisTables::build(0, dim).unwrap();
            let v = ReferenceSimplex::new(dim).measure();
            assert!((tab.mass[(0, 0)] - v).abs() < 1e-13);
            assert_eq!(tab.eigenvalues.len(), 1);
            assert!((tab.eigenvalues[0] - v).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let tab = BasisTables::build(5, 3).unwrap();
        let ones = vec![1.0; tab.indices.len()];
        let mut out = vec![0.0; tab.indices.len()];
        for dr in &tab.deriv_ref {
            dr.apply(&ones, &mut out);
            assert!(out.iter().all(|&v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn derivative_of_linear_coordinate_is_one() {
        // Coefficients of the polynomial r: its Bernstein coefficients at
        // degree N are the lattice values of r (linear function).
        for dim in 2..=3 {
            let n = 4;
            let tab = BasisTables::build(n, dim).unwrap();
            let simp = ReferenceSimplex::new(dim);
            let verts = simp.vertices();
            let coef: Vec<f64> = tab
                .indices
                .iter()
                .map(|a| {
                    let mut x = 0.0;
                    for (i, &ai) in a.entries().iter().enumerate() {
                        x += ai as f64 / n as f64 * verts[i][0];
                    }
                    x
                })
                .collect();
            let mut out = vec![0.0; coef.len()];
            tab.deriv_ref[0].apply(&coef, &mut out);
            assert!(out.iter().all(|&v| (v - 1.0).abs() < 1e-12));
            tab.deriv_ref[1].apply(&coef, &mut out);
            assert!(out.iter().all(|&v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in 2..=3 {
            let n = 5;
            let tab = BasisTables::build(n, dim).unwrap();
            let coef: Vec<f64> = (0..tab.indices.len())
                .map(|_| rng.random::<f64>() - 0.5)
                .collect();
            let mut dr = vec![0.0; coef.len()];
            tab.deriv_ref[0].apply(&coef, &mut dr);
            let simp = ReferenceSimplex::new(dim);
            let h = 1e-6;
            for _ in 0..20 {
                // Interior points, away from boundary so the FD stencil stays inside.
                let mut lam = random_bary(dim, &mut rng);
                for l in lam.iter_mut().take(dim + 1) {
                    *l = 0.2 / (dim as f64 + 1.0) + 0.8 * *l;
                }
                let x = simp.from_barycentric(&lam[..=dim]);
                let eval = |pt: &[f64]| -> f64 {
                    let b = simp.barycentric(pt);
                    let v = eval_unchecked(n, dim, &[b]);
                    (0..v.ncols).map(|c| v[(0, c)] * coef[c]).sum()
                };
                let mut xp = x;
                xp[0] += h;
                let mut xm = x;
                xm[0] -= h;
                let fd = (eval(&xp[..dim]) - eval(&xm[..dim])) / (2.0 * h);
                let vb = eval_unchecked(n, dim, &[simp.barycentric(&x[..dim])]);
                let exact: f64 = (0..vb.ncols).map(|c| vb[(0, c)] * dr[c]).sum();
                let denom = exact.abs().max(1.0);
                assert!(
                    ((fd - exact) / denom).abs() < 1e-6,
                    "fd {fd} vs matrix {exact}"
                );
            }
        }
    }

    #[test]
    fn derivative_sparsity_bound() {
        for dim in 2..=3 {
            for n in 1..=8 {
                let tab = BasisTables::build(n, dim).unwrap();
                for d in &tab.deriv_bary {
                    assert!(d.max_nnz_per_row() <= dim + 1);
                }
            }
        }
    }

    /// The spec route (numerical assembly M^{-1} S_i) as an oracle for the
    /// exact stencil, with a conditioning-aware tolerance.
    #[test]
    fn derivative_stencil_matches_numeric_assembly() {
        for dim in 2..=3 {
            for n in [2, 4, 6] {
                let rule = QuadratureRule::simplex(dim, 2 * n + 2);
                let vb = eval_matrix_rule(n, dim, &rule);
                let lo_set = IndexSet::new(n - 1, dim);
                let hi_set = IndexSet::new(n, dim);
                let vlo = eval_matrix_rule(n - 1, dim, &rule);
                let tab = BasisTables::new(n, dim, &rule).unwrap();
                for i in 0..=dim {
                    // dV(:, beta) = n * B^{n-1}_{beta - e_i}
                    let mut dv = DenseMatrix::zeros(rule.len(), hi_set.len());
                    for (col, b) in hi_set.iter().enumerate() {
                        if let Some(bm) = b.lowered(i) {
                            let lo = lo_set.position(&bm).unwrap();
                            for q in 0..rule.len() {
                                dv[(q, col)] = n as f64 * vlo[(q, lo)];
                            }
                        }
                    }
                    let mut vtw = DenseMatrix::zeros(hi_set.len(), rule.len());
                    for q in 0..rule.len() {
                        for r in 0..hi_set.len() {
                            vtw[(r, q)] = vb[(q, r)] * rule.weights[q];
                        }
                    }
                    let s = vtw.matmul(&dv);
                    let numeric = tab.mass.solve(&s).unwrap();
                    let exact = tab.deriv_bary[i].to_dense_rowmajor();
                    let mut worst = 0.0f64;
                    for r in 0..exact.nrows {
                        for c in 0..exact.ncols {
                            worst = worst.max((exact[(r, c)] - numeric[(r, c)]).abs());
                        }
                    }
                    assert!(worst < 1e-9, "n={n} d={dim} i={i}: {worst}");
                }
            }
        }
    }
}

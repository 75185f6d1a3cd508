//! Simplex quadrature from collapsed-coordinate tensor Gauss-Jacobi rules,
//! plus the quadrature interpolation/projection operators and the
//! quadrature-based weight-adjusted apply.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::ops_counter;
use crate::simplex::ReferenceSimplex;

/// Gauss-Jacobi rule with weight `(1-x)^alpha` on `[-1, 1]` (beta = 0),
/// computed by Golub-Welsch on the symmetric Jacobi recurrence matrix.
pub fn gauss_jacobi(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let beta = 0.0f64;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for k in 0..n {
        let kf = k as f64;
        let denom = (2.0 * kf + alpha + beta) * (2.0 * kf + alpha + beta + 2.0);
        diag[k] = if denom == 0.0 {
            (beta - alpha) / (alpha + beta + 2.0)
        } else {
            (beta * beta - alpha * alpha) / denom
        };
        if k + 1 < n {
            let k1 = kf + 1.0;
            let num = 4.0 * k1 * (k1 + alpha) * (k1 + beta) * (k1 + alpha + beta);
            let den = (2.0 * k1 + alpha + beta - 1.0)
                * (2.0 * k1 + alpha + beta).powi(2)
                * (2.0 * k1 + alpha + beta + 1.0);
            off[k] = (num / den).sqrt();
        }
    }
    let mut tri = nalgebra::DMatrix::zeros(n, n);
    for k in 0..n {
        tri[(k, k)] = diag[k];
        if k + 1 < n {
            tri[(k, k + 1)] = off[k];
            tri[(k + 1, k)] = off[k];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(tri);
    let mu0 = 2.0f64.powf(alpha + beta + 1.0) * gamma_int(alpha + 1.0) * gamma_int(beta + 1.0)
        / gamma_int(alpha + beta + 2.0);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let x = eig.eigenvalues[j];
            let w = mu0 * eig.eigenvectors[(0, j)].powi(2);
            (x, w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    (
        pairs.iter().map(|p| p.0).collect(),
        pairs.iter().map(|p| p.1).collect(),
    )
}

fn gamma_int(x: f64) -> f64 {
    // Only integer arguments occur here.
    let n = x.round() as usize;
    debug_assert!((x - n as f64).abs() < 1e-12 && n >= 1);
    crate::multi_index::factorial(n - 1)
}

/// Quadrature rule on the bi-unit reference simplex.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub dim: usize,
    pub exactness: usize,
    /// Reference cartesian coordinates, one `[r, s, t]` per point.
    pub points: Vec<[f64; 3]>,
    /// Barycentric coordinates, one `[l0..l3]` per point.
    pub bary: Vec<[f64; 4]>,
    /// Weights in reference-measure units (sum to the simplex measure).
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Tensor Gauss-Jacobi rule on the collapsed simplex, exact at least to
    /// `target_degree`.
    pub fn simplex(dim: usize, target_degree: usize) -> Self {
        assert!(dim == 2 || dim == 3);
        let n = target_degree / 2 + 1; // 1D Gauss exactness 2n-1 >= target
        let (xa, wa) = gauss_jacobi(n, 0.0);
        let (xb, wb) = gauss_jacobi(n, 1.0);
        let simp = ReferenceSimplex::new(dim);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        if dim == 2 {
            for i in 0..n {
                for j in 0..n {
                    let a = xa[i];
                    let b = xb[j];
                    let r = (1.0 + a) * (1.0 - b) / 2.0 - 1.0;
                    let s = b;
                    points.push([r, s, 0.0]);
                    weights.push(wa[i] * wb[j] / 2.0);
                }
            }
        } else {
            let (xc, wc) = gauss_jacobi(n, 2.0);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let (a, b, c) = (xa[i], xb[j], xc[k]);
                        let r = (1.0 + a) * (1.0 - b) * (1.0 - c) / 4.0 - 1.0;
                        let s = (1.0 + b) * (1.0 - c) / 2.0 - 1.0;
                        let t = c;
                        points.push([r, s, t]);
                        weights.push(wa[i] * wb[j] * wc[k] / 8.0);
                    }
                }
            }
        }
        let bary = points.iter().map(|p| simp.barycentric(&p[..dim])).collect();
        Self {
            dim,
            exactness: target_degree,
            points,
            bary,
            weights,
        }
    }

    /// Gauss-Legendre rule on the bi-unit interval (face rule for d=2).
    pub fn interval(target_degree: usize) -> Self {
        let n = target_degree / 2 + 1;
        let (x, w) = gauss_jacobi(n, 0.0);
        let points: Vec<[f64; 3]> = x.iter().map(|&r| [r, 0.0, 0.0]).collect();
        let bary = x
            .iter()
            .map(|&r| [(1.0 - r) / 2.0, (1.0 + r) / 2.0, 0.0, 0.0])
            .collect();
        Self {
            dim: 1,
            exactness: target_degree,
            points,
            bary,
            weights: w,
        }
    }

    /// Rule for the bi-unit face simplex of a d-dimensional element.
    pub fn face(dim: usize, target_degree: usize) -> Self {
        match dim {
            2 => Self::interval(target_degree),
            3 => Self::simplex(2, target_degree),
            _ => panic!("face rule needs dim 2 or 3"),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Basis-at-points interpolation `V_q` and quadrature projection
/// `P_q = M^{-1} V_q^T diag(w)` for a degree-`n` Bernstein basis.
#[derive(Debug, Clone)]
pub struct QuadratureOperators {
    pub n: usize,
    pub dim: usize,
    pub rule: QuadratureRule,
    pub vq: DenseMatrix,
    pub pq: DenseMatrix,
}

impl QuadratureOperators {
    pub fn new(n: usize, dim: usize, rule: QuadratureRule) -> Self {
        let vq = crate::bernstein::eval_matrix_rule(n, dim, &rule);
        let np = vq.ncols;
        let nq = vq.nrows;
        // Pq = M^{-1} Vq^T W. Since the rule is exact for degree 2n, this is
        // the weighted least-squares pseudo-inverse; computing it through the
        // thin QR of W^{1/2} Vq sidesteps the squared conditioning of M.
        let sqrt_w: Vec<f64> = rule.weights.iter().map(|&w| w.sqrt()).collect();
        let mut s = nalgebra::DMatrix::zeros(nq, np);
        for q in 0..nq {
            for i in 0..np {
                s[(q, i)] = sqrt_w[q] * vq[(q, i)];
            }
        }
        let qr = s.qr();
        let qt = qr.q().transpose();
        let r = qr.r();
        let mut qtw = nalgebra::DMatrix::zeros(np, nq);
        for q in 0..nq {
            for i in 0..np {
                qtw[(i, q)] = qt[(i, q)] * sqrt_w[q];
            }
        }
        let pq_na = r
            .solve_upper_triangular(&qtw)
            .expect("Vq has full column rank");
        let pq = DenseMatrix::from_nalgebra(&pq_na);
        Self {
            n,
            dim,
            rule,
            vq,
            pq,
        }
    }

    /// Multiply-adds per weight-adjusted apply.
    pub fn madds_per_apply(&self) -> u64 {
        let np = self.vq.ncols as u64;
        let nq = self.vq.nrows as u64;
        2 * np * nq + nq
    }

    /// `P_q diag(w) V_q u`: the L2 projection of `w * u` onto degree n.
    ///
    /// Rejects non-positive weight values (wavespeed bounds).
    pub fn wadg_apply(&self, u: &[f64], w_at_points: &[f64], out: &mut [f64]) -> Result<()> {
        if w_at_points.iter().any(|&w| w <= 0.0) {
            return Err(Error::NonPositiveWeight);
        }
        self.wadg_apply_unchecked(u, w_at_points, out);
        Ok(())
    }

    pub(crate) fn wadg_apply_unchecked(&self, u: &[f64], w_at_points: &[f64], out: &mut [f64]) {
        let mut vals = vec![0.0; self.vq.nrows];
        self.wadg_apply_into(u, w_at_points, out, &mut vals);
    }

    /// Allocation-free weighted apply with a caller-provided values buffer.
    pub fn wadg_apply_into(
        &self,
        u: &[f64],
        w_at_points: &[f64],
        out: &mut [f64],
        vals: &mut [f64],
    ) {
        self.vq.matvec(u, vals);
        for (v, w) in vals.iter_mut().zip(w_at_points) {
            *v *= w;
        }
        self.pq.matvec(vals, out);
        ops_counter::ORACLE_APPLY.add(self.madds_per_apply());
    }

    /// Values of the degree-n polynomial `u` at the rule's points.
    pub fn values_at_points(&self, u: &[f64]) -> Vec<f64> {
        let mut vals = vec![0.0; self.vq.nrows];
        self.vq.matvec(u, &mut vals);
        vals
    }

    /// L2 projection onto degree n from values at the rule's points.
    pub fn project_values(&self, vals: &[f64], out: &mut [f64]) {
        self.pq.matvec(vals, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multi_index::{factorial, multinomial, IndexSet};

    /// Closed-form simplex moment: integral of prod(lambda^alpha) over the
    /// reference simplex equals `V * d! * prod(alpha_i!) / (d + |alpha|)!`.
    fn moment(dim: usize, alpha: &[u16]) -> f64 {
        let v = ReferenceSimplex::new(dim).measure();
        let total: usize = alpha.iter().map(|&a| a as usize).sum();
        let mut num = v * factorial(dim);
        for &a in alpha {
            num *= factorial(a as usize);
        }
        num / factorial(dim + total)
    }

    #[test]
    fn integrates_unity_to_reference_measure() {
        let rule = QuadratureRule::simplex(2, 1);
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let rule3 = QuadratureRule::simplex(3, 1);
        let total3: f64 = rule3.weights.iter().sum();
        assert!((total3 - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn weights_positive() {
        for deg in [1, 5, 9, 17] {
            for d in 2..=3 {
                let rule = QuadratureRule::simplex(d, deg);
                assert!(rule.weights.iter().all(|&w| w > 0.0));
            }
        }
    }

    #[test]
    fn bernstein_pair_products_match_closed_form_moments() {
        // All pair products for N=4, d=3 under a rule of exactness 2N+1.
        let n = 4;
        let d = 3;
        let rule = QuadratureRule::simplex(d, 2 * n + 1);
        let set = IndexSet::new(n, d);
        for a in set.iter() {
            for b in set.iter() {
                let ca = multinomial(a);
                let cb = multinomial(b);
                let mut sum: Vec<u16> = a
                    .entries()
                    .iter()
                    .zip(b.entries())
                    .map(|(&x, &y)| x + y)
                    .collect();
                sum.resize(d + 1, 0);
                let exact = ca * cb * moment(d, &sum);
                let mut num = 0.0;
                for (q, lam) in rule.bary.iter().enumerate() {
                    let mut prod = rule.weights[q] * ca * cb;
                    for i in 0..=d {
                        prod *= lam[i].powi(sum[i] as i32);
                    }
                    num += prod;
                }
                assert!(
                    (num - exact).abs() <= 1e-12,
                    "moment mismatch: {num} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn projection_identity_on_polynomials() {
        for d in 2..=3 {
            for n in [1, 3, 5, 8] {
                let ops = QuadratureOperators::new(n, d, QuadratureRule::simplex(d, 2 * n + 1));
                let np = ops.vq.ncols;
                let u: Vec<f64> = (0..np)
                    .map(|i| (((i * 7 + 3) % 11) as f64 - 5.0) / 5.0)
                    .collect();
                let w = vec![1.0; ops.rule.len()];
                let mut out = vec![0.0; np];
                ops.wadg_apply(&u, &w, &mut out).unwrap();
                for (a, b) in u.iter().zip(&out) {
                    assert!((a - b).abs() < 1e-11, "PqVq != I at n={n} d={d}");
                }
            }
        }
    }

    #[test]
    fn constant_weight_scales() {
        let ops = QuadratureOperators::new(3, 2, QuadratureRule::simplex(2, 7));
        let np = ops.vq.ncols;
        let u: Vec<f64> = (0..np).map(|i| (i as f64).sin()).collect();
        let w = vec![2.5; ops.rule.len()];
        let mut out = vec![0.0; np];
        ops.wadg_apply(&u, &w, &mut out).unwrap();
        for (a, b) in u.iter().zip(&out) {
            assert!((2.5 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_positive_weight() {
        let ops = QuadratureOperators::new(2, 2, QuadratureRule::simplex(2, 5));
        let np = ops.vq.ncols;
        let u = vec![1.0; np];
        let mut w = vec![1.0; ops.rule.len()];
        w[0] = -0.1;
        let mut out = vec![0.0; np];
        assert!(ops.wadg_apply(&u, &w, &mut out).is_err());
    }
}

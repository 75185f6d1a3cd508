//! Weight-adjusted mass-inverse application: the quadrature reference path
//! and the fast Bernstein path (polynomial multiplication followed by a
//! telescoping L2 projection), for scalar and isotropic-elastic weights.

use crate::bernstein::eval_matrix_rule;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::multi_index::space_dim;
use crate::ops_counter;
use crate::poly::{MultiplicationStencil, ProjectionDecomposition};
use crate::quadrature::{QuadratureOperators, QuadratureRule};

/// How the weight-adjusted update is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WadgMode {
    /// Quadrature apply `P_q diag(w) V_q` with the degree-M projected weight.
    QuadratureOracle,
    /// Bernstein multiplication by the degree-M weight plus telescoping
    /// projection back to degree N.
    BernsteinFast,
    /// Quadrature apply with the exact weight values (no degree-M
    /// approximation); the full weight-adjusted reference scheme.
    Exact,
}

/// Reference machinery for weight-adjusted applies at fixed `(N, M, d)`.
pub struct WadgPipeline {
    pub n: usize,
    pub m: usize,
    pub dim: usize,
    pub stencil: MultiplicationStencil,
    pub decomp: ProjectionDecomposition,
    /// Degree-N quadrature operators over a rule exact to `2N + M`.
    pub quad: QuadratureOperators,
    /// Degree-M basis values at the same rule's points.
    vq_m: DenseMatrix,
    /// Degree-M projection from values at the rule's points.
    pq_m: DenseMatrix,
}

impl WadgPipeline {
    pub fn new(n: usize, m: usize, dim: usize, eigs: &[Vec<f64>]) -> Result<Self> {
        let rule = QuadratureRule::simplex(dim, 2 * n + m.max(1));
        let quad = QuadratureOperators::new(n, dim, rule.clone());
        let ops_m = QuadratureOperators::new(m, dim, rule);
        let vq_m = ops_m.vq.clone();
        let pq_m = ops_m.pq.clone();
        Ok(Self {
            n,
            m,
            dim,
            stencil: MultiplicationStencil::new(n, m, dim),
            decomp: ProjectionDecomposition::new(n, m, dim, eigs)?,
            quad,
            vq_m,
            pq_m,
        })
    }

    pub fn np(&self) -> usize {
        space_dim(self.n, self.dim)
    }

    pub fn num_points(&self) -> usize {
        self.quad.rule.len()
    }

    pub fn scratch(&self) -> WadgScratch {
        WadgScratch {
            hi: vec![0.0; space_dim(self.n + self.m, self.dim)],
            hi_sum: vec![0.0; space_dim(self.n + self.m, self.dim)],
            vals: vec![0.0; self.num_points()],
            vals_sum: vec![0.0; self.num_points()],
            tmp: vec![0.0; self.np()],
            telescope: self.decomp.work(),
        }
    }

    /// Multiply-adds per scalar fast-path apply.
    pub fn fast_madds(&self) -> u64 {
        self.stencil.madds_per_apply() + self.decomp.madds_per_apply()
    }

    /// Multiply-adds per scalar oracle apply.
    pub fn oracle_madds(&self) -> u64 {
        self.quad.madds_per_apply()
    }

    /// Scalar weight-adjusted apply `u <- P^N(w u)`.
    pub fn apply_scalar(
        &self,
        mode: WadgMode,
        weight: &ElementWeight<'_>,
        u: &mut [f64],
        scratch: &mut WadgScratch,
    ) -> Result<()> {
        match mode {
            WadgMode::BernsteinFast => {
                self.stencil.apply(u, weight.coeffs, &mut scratch.hi)?;
                self.decomp
                    .apply_with(&scratch.hi, u, &mut scratch.telescope)?;
            }
            WadgMode::QuadratureOracle => {
                self.quad.wadg_apply_into(
                    u,
                    weight.values_projected,
                    &mut scratch.tmp,
                    &mut scratch.vals,
                );
                u.copy_from_slice(&scratch.tmp);
            }
            WadgMode::Exact => {
                self.quad.wadg_apply_into(
                    u,
                    weight.values_exact,
                    &mut scratch.tmp,
                    &mut scratch.vals,
                );
                u.copy_from_slice(&scratch.tmp);
            }
        }
        Ok(())
    }
}

pub struct WadgScratch {
    pub hi: Vec<f64>,
    pub hi_sum: Vec<f64>,
    pub vals: Vec<f64>,
    pub vals_sum: Vec<f64>,
    pub tmp: Vec<f64>,
    pub telescope: crate::poly::TelescopeWork,
}

/// One element's view of a projected material field.
pub struct ElementWeight<'a> {
    pub coeffs: &'a [f64],
    pub values_projected: &'a [f64],
    pub values_exact: &'a [f64],
}

/// Degree-M projection of a scalar material over every element, stored once
/// at setup: coefficients for the fast path, projected point values for the
/// oracle path, and exact point values for the reference scheme.
pub struct ScalarMaterial {
    pub m: usize,
    pub coeffs: Vec<Vec<f64>>,
    pub values_projected: Vec<Vec<f64>>,
    pub values_exact: Vec<Vec<f64>>,
    pub min_value: f64,
    pub max_value: f64,
}

impl ScalarMaterial {
    pub fn element(&self, k: usize) -> ElementWeight<'_> {
        ElementWeight {
            coeffs: &self.coeffs[k],
            values_projected: &self.values_projected[k],
            values_exact: &self.values_exact[k],
        }
    }
}

/// L2-project an analytic material onto degree M over each element.
///
/// Rejects weights whose projection is not strictly positive at the
/// quadrature points.
pub fn project_material(
    pipeline: &WadgPipeline,
    mesh: &Mesh,
    f: impl Fn(&[f64; 3]) -> f64,
    require_positive: bool,
) -> Result<ScalarMaterial> {
    ops_counter::MATERIAL_PROJECTIONS.add(1);
    let nq = pipeline.num_points();
    let mp = space_dim(pipeline.m, pipeline.dim);
    let mut coeffs = Vec::with_capacity(mesh.num_elements());
    let mut values_projected = Vec::with_capacity(mesh.num_elements());
    let mut values_exact = Vec::with_capacity(mesh.num_elements());
    let mut min_value = f64::INFINITY;
    let mut max_value = f64::NEG_INFINITY;
    for k in 0..mesh.num_elements() {
        let mut exact = vec![0.0; nq];
        for (q, lam) in pipeline.quad.rule.bary.iter().enumerate() {
            let x = mesh.map_point(k, &lam[..=pipeline.dim]);
            exact[q] = f(&x);
        }
        let mut c = vec![0.0; mp];
        pipeline.pq_m.matvec(&exact, &mut c);
        let mut proj = vec![0.0; nq];
        pipeline.vq_m.matvec(&c, &mut proj);
        for &v in &proj {
            min_value = min_value.min(v);
            max_value = max_value.max(v);
        }
        if require_positive && proj.iter().any(|&v| v <= 0.0) {
            return Err(Error::NonPositiveWeight);
        }
        coeffs.push(c);
        values_projected.push(proj);
        values_exact.push(exact);
    }
    Ok(ScalarMaterial {
        m: pipeline.m,
        coeffs,
        values_projected,
        values_exact,
        min_value,
        max_value,
    })
}

/// Isotropic elastic material: density inverse and Lame fields projected to
/// degree M, with the positive-definiteness of the stiffness checked at the
/// quadrature points.
pub struct ElasticMaterial {
    pub rho_inv: ScalarMaterial,
    pub mu: ScalarMaterial,
    pub lambda: ScalarMaterial,
    pub two_mu: ScalarMaterial,
}

impl ElasticMaterial {
    pub fn project(
        pipeline: &WadgPipeline,
        mesh: &Mesh,
        rho: impl Fn(&[f64; 3]) -> f64,
        mu: impl Fn(&[f64; 3]) -> f64,
        lambda: impl Fn(&[f64; 3]) -> f64,
    ) -> Result<Self> {
        let rho_inv = project_material(pipeline, mesh, |x| 1.0 / rho(x), true)?;
        let mu_m = project_material(pipeline, mesh, &mu, true)?;
        let lambda_m = project_material(pipeline, mesh, &lambda, false)?;
        let two_mu = project_material(pipeline, mesh, |x| 2.0 * mu(x), true)?;
        // Isotropic C is positive definite iff mu > 0 and 3 lambda + 2 mu > 0.
        for k in 0..mesh.num_elements() {
            for q in 0..pipeline.num_points() {
                let m = mu_m.values_projected[k][q];
                let l = lambda_m.values_projected[k][q];
                if m <= 0.0 || 3.0 * l + 2.0 * m <= 0.0 {
                    return Err(Error::IndefiniteMaterial);
                }
            }
        }
        Ok(Self {
            rho_inv,
            mu: mu_m,
            lambda: lambda_m,
            two_mu,
        })
    }
}

/// Elastic weight-adjusted update for one element.
///
/// Velocities get the scalar `1/rho` apply per component. Stress block rows
/// use the isotropic structure: bulk rows `i` need `2 mu r_i + lambda
/// (r_0+r_1+r_2)`, shear rows `mu r_i`; the fast path sums the degree-(N+M)
/// products per row and applies one telescoping projection per row.
#[allow(clippy::too_many_arguments)]
pub fn elastic_update_element(
    pipeline: &WadgPipeline,
    mode: WadgMode,
    material: &ElasticMaterial,
    k: usize,
    rhs_v: &mut [f64],
    rhs_sigma: &mut [f64],
    np: usize,
    scratch: &mut WadgScratch,
) -> Result<()> {
    for a in 0..3 {
        pipeline.apply_scalar(
            mode,
            &material.rho_inv.element(k),
            &mut rhs_v[a * np..(a + 1) * np],
            scratch,
        )?;
    }
    match mode {
        WadgMode::BernsteinFast => {
            let mut sum_r = vec![0.0; np];
            for i in 0..np {
                sum_r[i] = rhs_sigma[i] + rhs_sigma[np + i] + rhs_sigma[2 * np + i];
            }
            for row in 0..3 {
                let r = &rhs_sigma[row * np..(row + 1) * np];
                pipeline
                    .stencil
                    .apply(r, &material.two_mu.coeffs[k], &mut scratch.hi)?;
                pipeline
                    .stencil
                    .apply_add(&sum_r, &material.lambda.coeffs[k], &mut scratch.hi);
                pipeline
                    .decomp
                    .apply_with(&scratch.hi, &mut scratch.tmp, &mut scratch.telescope)?;
                rhs_sigma[row * np..(row + 1) * np].copy_from_slice(&scratch.tmp);
            }
            for row in 3..6 {
                let r = &rhs_sigma[row * np..(row + 1) * np];
                pipeline
                    .stencil
                    .apply(r, &material.mu.coeffs[k], &mut scratch.hi)?;
                pipeline
                    .decomp
                    .apply_with(&scratch.hi, &mut scratch.tmp, &mut scratch.telescope)?;
                rhs_sigma[row * np..(row + 1) * np].copy_from_slice(&scratch.tmp);
            }
        }
        WadgMode::QuadratureOracle | WadgMode::Exact => {
            let pick = |mat: &'_ ScalarMaterial| -> Vec<f64> {
                match mode {
                    WadgMode::QuadratureOracle => mat.values_projected[k].clone(),
                    _ => mat.values_exact[k].clone(),
                }
            };
            let two_mu = pick(&material.two_mu);
            let lam = pick(&material.lambda);
            let mu = pick(&material.mu);
            let nq = pipeline.num_points();
            scratch.vals_sum.iter_mut().for_each(|v| *v = 0.0);
            for row in 0..3 {
                let r = &rhs_sigma[row * np..(row + 1) * np];
                let vals = pipeline.quad.values_at_points(r);
                for q in 0..nq {
                    scratch.vals_sum[q] += vals[q];
                }
            }
            for row in 0..3 {
                let r = &rhs_sigma[row * np..(row + 1) * np];
                let mut vals = pipeline.quad.values_at_points(r);
                for q in 0..nq {
                    vals[q] = two_mu[q] * vals[q] + lam[q] * scratch.vals_sum[q];
                }
                pipeline.quad.project_values(&vals, &mut scratch.tmp);
                rhs_sigma[row * np..(row + 1) * np].copy_from_slice(&scratch.tmp);
                ops_counter::ORACLE_APPLY.add(pipeline.oracle_madds());
            }
            for row in 3..6 {
                let r = &rhs_sigma[row * np..(row + 1) * np];
                let mut vals = pipeline.quad.values_at_points(r);
                for q in 0..nq {
                    vals[q] *= mu[q];
                }
                pipeline.quad.project_values(&vals, &mut scratch.tmp);
                rhs_sigma[row * np..(row + 1) * np].copy_from_slice(&scratch.tmp);
                ops_counter::ORACLE_APPLY.add(pipeline.oracle_madds());
            }
        }
    }
    Ok(())
}

/// Dense per-element check helper: eigenvalues of `M^{-1} M_w` stay positive
/// for positive weights (spectrum test support).
pub fn weighted_operator_spectrum(
    n: usize,
    dim: usize,
    weight_at_points: &[f64],
    rule: &QuadratureRule,
) -> Vec<f64> {
    let vq = eval_matrix_rule(n, dim, rule);
    let np = vq.ncols;
    let nq = rule.len();
    let mut vtw = DenseMatrix::zeros(np, nq);
    for q in 0..nq {
        for i in 0..np {
            vtw[(i, q)] = vq[(q, i)] * rule.weights[q] * weight_at_points[q];
        }
    }
    let mw = vtw.matmul(&vq);
    let mass = crate::bernstein::mass_matrix_closed(n, dim);
    let op = mass.solve(&mw).unwrap().to_nalgebra();
    // M^{-1} M_w is similar to the symmetric M^{-1/2} M_w M^{-1/2}; its
    // eigenvalues are real. Use the general eigensolver via symmetrization:
    // eig(M^{-1} M_w) = eig(L^{-1} M_w L^{-T}) with M = L L^T.
    let chol = nalgebra::Cholesky::new(mass.to_nalgebra()).expect("mass SPD");
    let l = chol.l();
    let linv = l.clone().try_inverse().unwrap();
    let sym = &linv * mw.to_nalgebra() * linv.transpose();
    let _ = op;
    nalgebra::SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernstein::eigenvalue_table;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_mesh(dim: usize) -> Mesh {
        Mesh::uniform(dim, 1).unwrap()
    }

    #[test]
    fn unit_weight_is_identity() {
        for dim in 2..=3 {
            let eigs = eigenvalue_table(6, dim).unwrap();
            let pipeline = WadgPipeline::new(4, 1, dim, &eigs).unwrap();
            let mesh = unit_mesh(dim);
            let material = project_material(&pipeline, &mesh, |_| 1.0, true).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(31);
            let mut u: Vec<f64> = (0..pipeline.np()).map(|_| rng.random::<f64>()).collect();
            let reference = u.clone();
            let mut scratch = pipeline.scratch();
            for mode in [WadgMode::BernsteinFast, WadgMode::QuadratureOracle] {
                u.copy_from_slice(&reference);
                pipeline
                    .apply_scalar(mode, &material.element(0), &mut u, &mut scratch)
                    .unwrap();
                for (a, b) in u.iter().zip(&reference) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn constant_weight_scales() {
        let eigs = eigenvalue_table(5, 2).unwrap();
        let pipeline = WadgPipeline::new(3, 2, 2, &eigs).unwrap();
        let mesh = unit_mesh(2);
        let material = project_material(&pipeline, &mesh, |_| 2.25, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let reference: Vec<f64> = (0..pipeline.np()).map(|_| rng.random::<f64>()).collect();
        let mut scratch = pipeline.scratch();
        let mut u = reference.clone();
        pipeline
            .apply_scalar(WadgMode::BernsteinFast, &material.element(1), &mut u, &mut scratch)
            .unwrap();
        for (a, b) in u.iter().zip(&reference) {
            assert!((a - 2.25 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn fast_equals_oracle_for_polynomial_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for dim in 2..=3 {
            for n in [2, 4] {
                for m in [1, 2] {
                    let eigs = eigenvalue_table(n + m, dim).unwrap();
                    let pipeline = WadgPipeline::new(n, m, dim, &eigs).unwrap();
                    // Random positive degree-M weight: positive Bernstein
                    // coefficients guarantee positivity.
                    let mp = space_dim(m, dim);
                    let wc: Vec<f64> = (0..mp).map(|_| 0.5 + rng.random::<f64>()).collect();
                    let wc_ref = wc.clone();
                    let material = {
                        // Project the analytic evaluation of this polynomial;
                        // projection recovers it exactly.
                        let vq_m = eval_matrix_rule(m, dim, &pipeline.quad.rule);
                        let mut vals = vec![0.0; pipeline.num_points()];
                        vq_m.matvec(&wc, &mut vals);
                        ScalarMaterial {
                            m,
                            coeffs: vec![wc_ref],
                            values_projected: vec![vals.clone()],
                            values_exact: vec![vals],
                            min_value: 0.5,
                            max_value: 1.5,
                        }
                    };
                    let mut scratch = pipeline.scratch();
                    let u0: Vec<f64> = (0..pipeline.np())
                        .map(|_| rng.random::<f64>() - 0.5)
                        .collect();
                    let mut fast = u0.clone();
                    pipeline
                        .apply_scalar(
                            WadgMode::BernsteinFast,
                            &material.element(0),
                            &mut fast,
                            &mut scratch,
                        )
                        .unwrap();
                    let mut oracle = u0.clone();
                    pipeline
                        .apply_scalar(
                            WadgMode::QuadratureOracle,
                            &material.element(0),
                            &mut oracle,
                            &mut scratch,
                        )
                        .unwrap();
                    for (a, b) in fast.iter().zip(&oracle) {
                        assert!((a - b).abs() < 1e-10, "n={n} m={m} d={dim}: {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn material_projection_recovers_polynomials_exactly() {
        let eigs = eigenvalue_table(4, 2).unwrap();
        let pipeline = WadgPipeline::new(3, 1, 2, &eigs).unwrap();
        let mesh = unit_mesh(2);
        let material =
            project_material(&pipeline, &mesh, |x| 1.0 + 0.25 * x[0] - 0.125 * x[1], true)
                .unwrap();
        for k in 0..mesh.num_elements() {
            for (q, lam) in pipeline.quad.rule.bary.iter().enumerate() {
                let x = mesh.map_point(k, &lam[..=2]);
                let expect = 1.0 + 0.25 * x[0] - 0.125 * x[1];
                assert!((material.values_projected[k][q] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_positive_material() {
        let eigs = eigenvalue_table(3, 2).unwrap();
        let pipeline = WadgPipeline::new(2, 1, 2, &eigs).unwrap();
        let mesh = unit_mesh(2);
        assert!(project_material(&pipeline, &mesh, |x| x[0], true).is_err());
    }

    #[test]
    fn constant_elastic_material_reduces_to_matrix_scaling() {
        let (mu0, lam0, rho0) = (1.3, 0.7, 1.1);
        let eigs = eigenvalue_table(4, 3).unwrap();
        let pipeline = WadgPipeline::new(2, 1, 3, &eigs).unwrap();
        let mesh = unit_mesh(3);
        let material =
            ElasticMaterial::project(&pipeline, &mesh, |_| rho0, |_| mu0, |_| lam0).unwrap();
        let np = pipeline.np();
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let v0: Vec<f64> = (0..3 * np).map(|_| rng.random::<f64>() - 0.5).collect();
        let s0: Vec<f64> = (0..6 * np).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut v = v0.clone();
        let mut s = s0.clone();
        let mut scratch = pipeline.scratch();
        elastic_update_element(
            &pipeline,
            WadgMode::BernsteinFast,
            &material,
            0,
            &mut v,
            &mut s,
            np,
            &mut scratch,
        )
        .unwrap();
        for i in 0..3 * np {
            assert!((v[i] - v0[i] / rho0).abs() < 1e-12);
        }
        for row in 0..3 {
            for i in 0..np {
                let sum = s0[i] + s0[np + i] + s0[2 * np + i];
                let expect = 2.0 * mu0 * s0[row * np + i] + lam0 * sum;
                assert!((s[row * np + i] - expect).abs() < 1e-11);
            }
        }
        for row in 3..6 {
            for i in 0..np {
                assert!((s[row * np + i] - mu0 * s0[row * np + i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn elastic_fast_equals_oracle_for_polynomial_material() {
        let eigs = eigenvalue_table(5, 3).unwrap();
        let pipeline = WadgPipeline::new(3, 1, 3, &eigs).unwrap();
        let mesh = unit_mesh(3);
        let material = ElasticMaterial::project(
            &pipeline,
            &mesh,
            |x| 1.0 + 0.2 * x[0],
            |x| 1.0 + 0.15 * x[1] - 0.1 * x[2],
            |x| 0.8 - 0.2 * x[0] + 0.1 * x[1],
        )
        .unwrap();
        // rho itself is linear, so 1/rho is NOT degree M; replace the density
        // weight by its own projection for an apples-to-apples mode check
        // (both modes must share the projected weight).
        let np = pipeline.np();
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let v0: Vec<f64> = (0..3 * np).map(|_| rng.random::<f64>() - 0.5).collect();
        let s0: Vec<f64> = (0..6 * np).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut scratch = pipeline.scratch();
        let (mut vf, mut sf) = (v0.clone(), s0.clone());
        elastic_update_element(
            &pipeline,
            WadgMode::BernsteinFast,
            &material,
            0,
            &mut vf,
            &mut sf,
            np,
            &mut scratch,
        )
        .unwrap();
        let (mut vo, mut so) = (v0.clone(), s0.clone());
        elastic_update_element(
            &pipeline,
            WadgMode::QuadratureOracle,
            &material,
            0,
            &mut vo,
            &mut so,
            np,
            &mut scratch,
        )
        .unwrap();
        for (a, b) in vf.iter().zip(&vo) {
            assert!((a - b).abs() < 1e-10);
        }
        for (a, b) in sf.iter().zip(&so) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rhs_stays_zero() {
        let eigs = eigenvalue_table(3, 3).unwrap();
        let pipeline = WadgPipeline::new(2, 1, 3, &eigs).unwrap();
        let mesh = unit_mesh(3);
        let material =
            ElasticMaterial::project(&pipeline, &mesh, |_| 1.0, |_| 1.0, |_| 1.0).unwrap();
        let np = pipeline.np();
        let mut v = vec![0.0; 3 * np];
        let mut s = vec![0.0; 6 * np];
        let mut scratch = pipeline.scratch();
        elastic_update_element(
            &pipeline,
            WadgMode::BernsteinFast,
            &material,
            0,
            &mut v,
            &mut s,
            np,
            &mut scratch,
        )
        .unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
        assert!(s.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn weighted_operator_spectrum_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for dim in 2..=3 {
            for n in 1..=3 {
                let rule = QuadratureRule::simplex(dim, 2 * n + 2);
                let w: Vec<f64> = (0..rule.len()).map(|_| 0.5 + rng.random::<f64>()).collect();
                let spec = weighted_operator_spectrum(n, dim, &w, &rule);
                assert!(spec.iter().all(|&l| l > 0.0));
            }
        }
    }
}

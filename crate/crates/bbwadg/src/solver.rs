//! Assembled time-domain solver: initial projection, manufactured-solution
//! source, the staged RHS (DG kernels + weight-adjusted update), error norms
//! and energy diagnostics.

use crate::bernstein::eigenvalue_table;
use crate::config::{MeshSpec, Mode, RunConfig, System, WavespeedModel};
use crate::dense::DenseMatrix;
use crate::error::Result;
use crate::kernels::{
    acoustic_rhs, elastic_rhs, BoundaryKind, PenaltyParams, RefOperators, StateVec, N_STRESS,
    N_VEL,
};
use crate::mesh::{Mesh, TraceMaps};
use crate::quadrature::{QuadratureOperators, QuadratureRule};
use crate::time::{lsrk4_step, Lsrk4};
use crate::wadg::{
    elastic_update_element, project_material, ElasticMaterial, ScalarMaterial, WadgMode,
    WadgPipeline,
};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Exact manufactured pressure `prod_i sin(pi x_i) * cos(pi t)`.
pub fn exact_pressure(dim: usize, x: &[f64; 3], t: f64) -> f64 {
    let mut p = (PI * t).cos();
    for c in x.iter().take(dim) {
        p *= (PI * c).sin();
    }
    p
}

/// Matching exact velocity component `i`.
pub fn exact_velocity(dim: usize, i: usize, x: &[f64; 3], t: f64) -> f64 {
    let mut v = -(PI * t).sin();
    for (j, c) in x.iter().enumerate().take(dim) {
        v *= if j == i {
            (PI * c).cos()
        } else {
            (PI * c).sin()
        };
    }
    v
}

/// Spatial factor of the manufactured source:
/// `f = (d - 1/c^2) pi prod_i sin(pi x_i) sin(pi t)`.
pub fn source_factor(dim: usize, model: &WavespeedModel, x: &[f64; 3]) -> f64 {
    let c2 = model.c2(dim, x);
    let mut s = (dim as f64 - 1.0 / c2) * PI;
    for c in x.iter().take(dim) {
        s *= (PI * c).sin();
    }
    s
}

/// Isotropic elastic material models derived from the wavespeed spec.
pub fn elastic_model(model: WavespeedModel, dim: usize) -> ElasticModelFns {
    match model {
        WavespeedModel::Const { value } => ElasticModelFns {
            rho: Box::new(|_| 1.0),
            mu: Box::new(move |_| value),
            lambda: Box::new(move |_| value),
        },
        WavespeedModel::Sine { k } => {
            let mu = move |x: &[f64; 3]| {
                let mut p = 1.0;
                for c in x.iter().take(dim) {
                    p *= (k * PI * c).sin();
                }
                1.0 + 0.25 * p
            };
            let lambda = move |x: &[f64; 3]| {
                let mut p = 1.0;
                for c in x.iter().take(dim) {
                    p *= (k * PI * c).cos();
                }
                1.0 + 0.25 * p
            };
            let rho = move |x: &[f64; 3]| {
                let mut p = 1.0;
                for (j, c) in x.iter().enumerate().take(dim) {
                    p *= if j % 2 == 0 {
                        (k * PI * c).sin()
                    } else {
                        (k * PI * c).cos()
                    };
                }
                1.0 + 0.25 * p
            };
            ElasticModelFns {
                rho: Box::new(rho),
                mu: Box::new(mu),
                lambda: Box::new(lambda),
            }
        }
    }
}

pub struct ElasticModelFns {
    pub rho: Box<dyn Fn(&[f64; 3]) -> f64 + Sync>,
    pub mu: Box<dyn Fn(&[f64; 3]) -> f64 + Sync>,
    pub lambda: Box<dyn Fn(&[f64; 3]) -> f64 + Sync>,
}

pub struct Simulation {
    pub config: RunConfig,
    pub mesh: Mesh,
    pub ops: RefOperators,
    pub maps: TraceMaps,
    pub pipeline: WadgPipeline,
    /// Degree-N operators over a finer rule (degree 2N+2) for initial
    /// projection, error norms and energy.
    pub fine: QuadratureOperators,
    pub acoustic_material: Option<ScalarMaterial>,
    pub elastic_material: Option<ElasticMaterial>,
    /// Degree-N coefficients of the source spatial factor, per element.
    source: Option<Vec<Vec<f64>>>,
    pub dt: f64,
    pub steps: usize,
}

pub struct RunOutput {
    pub dt: f64,
    pub steps: usize,
    pub final_error_p: Option<f64>,
    pub energies: Vec<f64>,
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let mesh = match &config.mesh {
            MeshSpec::Uniform(n) => Mesh::uniform(config.dim, *n)?,
            MeshSpec::Gmsh(path) => {
                crate::gmsh::read_gmsh(std::path::Path::new(path), config.dim)?.mesh
            }
        };
        Self::with_mesh(config, mesh)
    }

    pub fn with_mesh(config: RunConfig, mesh: Mesh) -> Result<Self> {
        let (n, m, dim) = (config.n, config.m, config.dim);
        let ops = RefOperators::new(n, dim)?;
        let maps = TraceMaps::new(&mesh, n)?;
        let eigs = eigenvalue_table(n + m, dim)?;
        let pipeline = WadgPipeline::new(n, m, dim, &eigs)?;
        let fine = QuadratureOperators::new(n, dim, QuadratureRule::simplex(dim, 2 * n + 2));

        let mut sim = Self {
            config,
            mesh,
            ops,
            maps,
            pipeline,
            fine,
            acoustic_material: None,
            elastic_material: None,
            source: None,
            dt: 0.0,
            steps: 0,
        };
        sim.setup_materials()?;
        sim.setup_source();
        sim.setup_dt();
        Ok(sim)
    }

    fn setup_materials(&mut self) -> Result<()> {
        match self.config.system {
            System::Acoustic => {
                let model = self.config.wavespeed;
                let dim = self.config.dim;
                let mat = project_material(
                    &self.pipeline,
                    &self.mesh,
                    |x| model.c2(dim, x),
                    true,
                )?;
                self.acoustic_material = Some(mat);
            }
            System::Elastic => {
                let fns = elastic_model(self.config.wavespeed, self.config.dim);
                let mat = ElasticMaterial::project(
                    &self.pipeline,
                    &self.mesh,
                    &*fns.rho,
                    &*fns.mu,
                    &*fns.lambda,
                )?;
                self.elastic_material = Some(mat);
            }
        }
        Ok(())
    }

    fn setup_source(&mut self) {
        if self.config.plain || self.config.system != System::Acoustic {
            return;
        }
        let dim = self.config.dim;
        let model = self.config.wavespeed;
        let nq = self.fine.rule.len();
        let src: Vec<Vec<f64>> = (0..self.mesh.num_elements())
            .into_par_iter()
            .map(|k| {
                let mut vals = vec![0.0; nq];
                for (q, lam) in self.fine.rule.bary.iter().enumerate() {
                    let x = self.mesh.map_point(k, &lam[..=dim]);
                    vals[q] = source_factor(dim, &model, &x);
                }
                let mut c = vec![0.0; self.ops.np()];
                self.fine.project_values(&vals, &mut c);
                c
            })
            .collect();
        self.source = Some(src);
    }

    fn setup_dt(&mut self) {
        let c_max = self.max_wavespeed();
        let n = self.config.n as f64;
        let h_min = self.mesh.h_min();
        let dt_cap = self.config.cfl * h_min / (c_max * n * n);
        let steps = (self.config.final_time / dt_cap).ceil().max(1.0) as usize;
        self.steps = steps;
        self.dt = self.config.final_time / steps as f64;
    }

    fn max_wavespeed(&self) -> f64 {
        match self.config.system {
            System::Acoustic => {
                let mat = self.acoustic_material.as_ref().unwrap();
                mat.max_value.max(mat.values_exact.iter().flatten().fold(0.0f64, |m, &v| m.max(v))).sqrt()
            }
            System::Elastic => {
                let mat = self.elastic_material.as_ref().unwrap();
                let mut cmax: f64 = 0.0;
                let nq = self.pipeline.num_points();
                for k in 0..self.mesh.num_elements() {
                    for q in 0..nq {
                        let mu = mat.mu.values_exact[k][q];
                        let lam = mat.lambda.values_exact[k][q];
                        let rho_inv = mat.rho_inv.values_exact[k][q];
                        cmax = cmax.max(((lam + 2.0 * mu) * rho_inv).max(0.0));
                    }
                }
                cmax.sqrt()
            }
        }
    }

    pub fn ncomp(&self) -> usize {
        match self.config.system {
            System::Acoustic => 1 + self.config.dim,
            System::Elastic => N_VEL + N_STRESS,
        }
    }

    /// L2-project the initial data onto the broken polynomial space.
    pub fn initial_state(&self) -> StateVec {
        let dim = self.config.dim;
        let np = self.ops.np();
        let ncomp = self.ncomp();
        let mut state = StateVec::zeros(self.mesh.num_elements(), ncomp, np);
        let nq = self.fine.rule.len();
        let blocks: Vec<Vec<f64>> = (0..self.mesh.num_elements())
            .into_par_iter()
            .map(|k| {
                let mut block = vec![0.0; ncomp * np];
                let mut vals = vec![0.0; nq];
                let project = |vals: &[f64], out: &mut [f64], fine: &QuadratureOperators| {
                    fine.project_values(vals, out);
                };
                match self.config.system {
                    System::Acoustic => {
                        if self.config.plain {
                            for (q, lam) in self.fine.rule.bary.iter().enumerate() {
                                let x = self.mesh.map_point(k, &lam[..=dim]);
                                vals[q] = exact_pressure(dim, &x, 0.0);
                            }
                            project(&vals, &mut block[..np], &self.fine);
                        } else {
                            for (q, lam) in self.fine.rule.bary.iter().enumerate() {
                                let x = self.mesh.map_point(k, &lam[..=dim]);
                                vals[q] = exact_pressure(dim, &x, 0.0);
                            }
                            project(&vals, &mut block[..np], &self.fine);
                            // u(x, 0) = 0.
                        }
                    }
                    System::Elastic => {
                        for comp in 0..3 {
                            for (q, lam) in self.fine.rule.bary.iter().enumerate() {
                                let x = self.mesh.map_point(k, &lam[..=dim]);
                                vals[q] = exact_pressure(dim, &x, 0.0);
                            }
                            let s = N_VEL + comp;
                            project(&vals, &mut block[s * np..(s + 1) * np], &self.fine);
                        }
                    }
                }
                block
            })
            .collect();
        for (k, block) in blocks.into_iter().enumerate() {
            let s = ncomp * np;
            state.data[k * s..(k + 1) * s].copy_from_slice(&block);
        }
        state
    }

    fn wadg_mode(&self) -> WadgMode {
        match self.config.mode {
            Mode::Fast => WadgMode::BernsteinFast,
            Mode::Oracle => WadgMode::QuadratureOracle,
            Mode::Exact => WadgMode::Exact,
        }
    }

    /// Full semi-discrete RHS including source and weight-adjusted update.
    pub fn rhs(&self, state: &StateVec, t: f64, out: &mut StateVec) {
        let penalties = PenaltyParams {
            tau_p: self.config.tau_p,
            tau_u: self.config.tau_u,
            tau_v: self.config.tau_v,
            tau_sigma: self.config.tau_sigma,
        };
        let np = self.ops.np();
        match self.config.system {
            System::Acoustic => {
                acoustic_rhs(
                    state,
                    &self.mesh,
                    &self.maps,
                    &self.ops,
                    &penalties,
                    BoundaryKind::Reflect,
                    out,
                );
                let mode = self.wadg_mode();
                let material = self.acoustic_material.as_ref().unwrap();
                let source = self.source.as_ref();
                let amp = (PI * t).sin();
                let blk = out.ncomp * np;
                out.data
                    .par_chunks_mut(blk)
                    .enumerate()
                    .for_each_init(
                        || self.pipeline.scratch(),
                        |scratch, (k, block)| {
                            let rhs_p = &mut block[..np];
                            if let Some(src) = source {
                                for (o, s) in rhs_p.iter_mut().zip(&src[k]) {
                                    *o += amp * s;
                                }
                            }
                            self.pipeline
                                .apply_scalar(mode, &material.element(k), rhs_p, scratch)
                                .expect("configured update");
                        },
                    );
            }
            System::Elastic => {
                elastic_rhs(
                    state,
                    &self.mesh,
                    &self.maps,
                    &self.ops,
                    &penalties,
                    BoundaryKind::Reflect,
                    out,
                );
                let mode = self.wadg_mode();
                let material = self.elastic_material.as_ref().unwrap();
                let blk = out.ncomp * np;
                out.data
                    .par_chunks_mut(blk)
                    .enumerate()
                    .for_each_init(
                        || self.pipeline.scratch(),
                        |scratch, (k, block)| {
                            let (v, sigma) = block.split_at_mut(N_VEL * np);
                            elastic_update_element(
                                &self.pipeline,
                                mode,
                                material,
                                k,
                                v,
                                sigma,
                                np,
                                scratch,
                            )
                            .expect("configured update");
                        },
                    );
            }
        }
    }

    /// March to the final time. `energy_every > 0` records the discrete
    /// energy that often.
    pub fn run(&self, energy_every: usize) -> Result<RunOutput> {
        let mut state = self.initial_state();
        let mut residual = StateVec::zeros(state.nelem, state.ncomp, state.np);
        let mut rhs_buf = StateVec::zeros(state.nelem, state.ncomp, state.np);
        let scheme = Lsrk4::default();
        let mut energies = Vec::new();
        if energy_every > 0 {
            energies.push(self.energy(&state));
        }
        for step in 0..self.steps {
            let t = step as f64 * self.dt;
            lsrk4_step(
                &scheme,
                &mut state,
                &mut residual,
                &mut rhs_buf,
                t,
                self.dt,
                step,
                |s, tau, out| self.rhs(s, tau, out),
            )?;
            if energy_every > 0 && (step + 1) % energy_every == 0 {
                energies.push(self.energy(&state));
            }
        }
        let final_error_p = if self.config.system == System::Acoustic && !self.config.plain {
            Some(self.l2_error(&state, self.config.final_time))
        } else {
            None
        };
        Ok(RunOutput {
            dt: self.dt,
            steps: self.steps,
            final_error_p,
            energies,
        })
    }

    /// Run and also hand back the final state (mode-agreement checks).
    pub fn run_returning_state(&self) -> Result<(RunOutput, StateVec)> {
        let mut state = self.initial_state();
        let mut residual = StateVec::zeros(state.nelem, state.ncomp, state.np);
        let mut rhs_buf = StateVec::zeros(state.nelem, state.ncomp, state.np);
        let scheme = Lsrk4::default();
        for step in 0..self.steps {
            let t = step as f64 * self.dt;
            lsrk4_step(
                &scheme,
                &mut state,
                &mut residual,
                &mut rhs_buf,
                t,
                self.dt,
                step,
                |s, tau, out| self.rhs(s, tau, out),
            )?;
        }
        let final_error_p = if self.config.system == System::Acoustic && !self.config.plain {
            Some(self.l2_error(&state, self.config.final_time))
        } else {
            None
        };
        Ok((
            RunOutput {
                dt: self.dt,
                steps: self.steps,
                final_error_p,
                energies: Vec::new(),
            },
            state,
        ))
    }

    /// Broken L2 error of the pressure against the manufactured solution,
    /// with deterministic element-ordered summation.
    pub fn l2_error(&self, state: &StateVec, t: f64) -> f64 {
        let dim = self.config.dim;
        let per_element: Vec<f64> = (0..self.mesh.num_elements())
            .into_par_iter()
            .map(|k| {
                let vals = self.fine.values_at_points(state.comp(k, 0));
                let mut acc = 0.0;
                for (q, lam) in self.fine.rule.bary.iter().enumerate() {
                    let x = self.mesh.map_point(k, &lam[..=dim]);
                    let diff = vals[q] - exact_pressure(dim, &x, t);
                    acc += self.fine.rule.weights[q] * diff * diff;
                }
                self.mesh.geo[k].jacobian * acc
            })
            .collect();
        per_element.iter().sum::<f64>().sqrt()
    }

    /// Broken L2 norm of the difference between two states (all components).
    pub fn state_distance(a: &StateVec, b: &StateVec) -> f64 {
        a.data
            .iter()
            .zip(&b.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Discrete energy. For the acoustic system this is the weight-adjusted
    /// norm `p^T M (M_w)^{-1} M p / 2 + |u|_M^2 / 2` whose decay the scheme
    /// guarantees; the elastic energy integrates the physical density.
    pub fn energy(&self, state: &StateVec) -> f64 {
        let np = self.ops.np();
        let dim = self.config.dim;
        let nq = self.fine.rule.len();
        let mass = crate::bernstein::mass_matrix_closed(self.config.n, dim);
        match self.config.system {
            System::Acoustic => {
                let material = self.acoustic_material.as_ref().unwrap();
                // Weight values at the fine rule's points.
                let vq_m = crate::bernstein::eval_matrix_rule(material.m, dim, &self.fine.rule);
                let per: Vec<f64> = (0..self.mesh.num_elements())
                    .into_par_iter()
                    .map(|k| {
                        let jac = self.mesh.geo[k].jacobian;
                        let mut w = vec![0.0; nq];
                        match self.config.mode {
                            Mode::Exact => {
                                for (q, lam) in self.fine.rule.bary.iter().enumerate() {
                                    let x = self.mesh.map_point(k, &lam[..=dim]);
                                    w[q] = self.config.wavespeed.c2(dim, &x);
                                }
                            }
                            _ => vq_m.matvec(&material.coeffs[k], &mut w),
                        }
                        // M_w = Vq^T diag(rule w * c2) Vq on the reference
                        // element.
                        let vq = &self.fine.vq;
                        let mut vtw = DenseMatrix::zeros(np, nq);
                        for q in 0..nq {
                            for i in 0..np {
                                vtw[(i, q)] = vq[(q, i)] * self.fine.rule.weights[q] * w[q];
                            }
                        }
                        let mw = vtw.matmul(vq);
                        let p = state.comp(k, 0);
                        let mut mp = vec![0.0; np];
                        mass.matvec(p, &mut mp);
                        let mp_mat = DenseMatrix {
                            nrows: np,
                            ncols: 1,
                            data: mp.clone(),
                        };
                        let y = mw.solve(&mp_mat).expect("weighted mass SPD");
                        let mut e = 0.0;
                        for i in 0..np {
                            e += mp[i] * y.data[i];
                        }
                        for c in 1..=dim {
                            let u = state.comp(k, c);
                            let mut mu = vec![0.0; np];
                            mass.matvec(u, &mut mu);
                            for i in 0..np {
                                e += u[i] * mu[i];
                            }
                        }
                        0.5 * jac * e
                    })
                    .collect();
                per.iter().sum()
            }
            System::Elastic => {
                let material = self.elastic_material.as_ref().unwrap();
                let per: Vec<f64> = (0..self.mesh.num_elements())
                    .into_par_iter()
                    .map(|k| {
                        let jac = self.mesh.geo[k].jacobian;
                        // Pointwise rho |v|^2 + sigma : C^{-1} sigma at the
                        // pipeline rule's points.
                        let rule = &self.pipeline.quad.rule;
                        let mut vals = vec![[0.0f64; 9]; rule.len()];
                        for (c, slot) in (0..9).enumerate() {
                            let v = self.pipeline.quad.values_at_points(state.comp(k, c));
                            for (q, val) in v.iter().enumerate() {
                                vals[q][slot] = *val;
                            }
                        }
                        let mut e = 0.0;
                        for (q, wq) in rule.weights.iter().enumerate() {
                            let rho = 1.0 / material.rho_inv.values_exact[k][q];
                            let mu = material.mu.values_exact[k][q];
                            let lam = material.lambda.values_exact[k][q];
                            let v2: f64 = vals[q][..3].iter().map(|x| x * x).sum();
                            // Compliance contraction for isotropic C.
                            let (sxx, syy, szz) = (vals[q][3], vals[q][4], vals[q][5]);
                            let tr = sxx + syy + szz;
                            let bulk = 3.0 * lam + 2.0 * mu;
                            let dev2 = sxx * sxx + syy * syy + szz * szz - tr * tr / 3.0;
                            let shear2: f64 =
                                vals[q][6..9].iter().map(|x| x * x).sum();
                            let compliance =
                                tr * tr / (3.0 * bulk) + dev2 / (2.0 * mu) + shear2 / mu;
                            e += wq * (rho * v2 + compliance);
                        }
                        0.5 * jac * e
                    })
                    .collect();
                per.iter().sum()
            }
        }
    }
}

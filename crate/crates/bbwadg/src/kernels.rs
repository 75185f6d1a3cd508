//! Reference-element DG kernels in the Bernstein basis: sparse volume
//! derivatives, factorized lifts, and penalty-flux surface terms for the
//! acoustic and elastic first-order systems.

use crate::bernstein::BasisTables;
use crate::error::Result;
use crate::lift::LiftFactorization;
use crate::mesh::{Mesh, TraceMaps};
use crate::multi_index::space_dim;
use rayon::prelude::*;

/// Per-element, component-blocked coefficient storage:
/// `data[k * ncomp * np + c * np + i]`.
#[derive(Debug, Clone)]
pub struct StateVec {
    pub data: Vec<f64>,
    pub ncomp: usize,
    pub np: usize,
    pub nelem: usize,
}

impl StateVec {
    pub fn zeros(nelem: usize, ncomp: usize, np: usize) -> Self {
        Self {
            data: vec![0.0; nelem * ncomp * np],
            ncomp,
            np,
            nelem,
        }
    }

    pub fn block(&self, k: usize) -> &[f64] {
        let s = self.ncomp * self.np;
        &self.data[k * s..(k + 1) * s]
    }

    pub fn comp(&self, k: usize, c: usize) -> &[f64] {
        let s = self.ncomp * self.np;
        &self.data[k * s + c * self.np..k * s + (c + 1) * self.np]
    }

    pub fn comp_mut(&mut self, k: usize, c: usize) -> &mut [f64] {
        let s = self.ncomp * self.np;
        &mut self.data[k * s + c * self.np..k * s + (c + 1) * self.np]
    }

    pub fn blocks_par_mut(&mut self) -> rayon::slice::ChunksMut<'_, f64> {
        let s = self.ncomp * self.np;
        self.data.par_chunks_mut(s)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Which ghost state closes the boundary faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Pressure release: `p+ = -p`, `u+ = u` (acoustic); traction reflection
    /// `sigma-jump = -2 sigma`, `v+ = v` (elastic).
    Reflect,
    /// Zero-jump extrapolation; used by kernel tests.
    Extrapolate,
}

/// Reference-element operator bundle shared across elements.
pub struct RefOperators {
    pub n: usize,
    pub dim: usize,
    pub tables: BasisTables,
    pub lift: LiftFactorization,
}

impl RefOperators {
    pub fn new(n: usize, dim: usize) -> Result<Self> {
        Ok(Self {
            n,
            dim,
            tables: BasisTables::build(n, dim)?,
            lift: LiftFactorization::new(n, dim)?,
        })
    }

    pub fn np(&self) -> usize {
        space_dim(self.n, self.dim)
    }

    pub fn npf(&self) -> usize {
        space_dim(self.n, self.dim - 1)
    }
}

pub struct PenaltyParams {
    pub tau_p: f64,
    pub tau_u: f64,
    pub tau_v: f64,
    pub tau_sigma: f64,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        Self {
            tau_p: 1.0,
            tau_u: 1.0,
            tau_v: 1.0,
            tau_sigma: 1.0,
        }
    }
}

struct FaceScratch {
    mine: Vec<Vec<f64>>,
    jump: Vec<Vec<f64>>,
    flux_a: Vec<f64>,
    flux_b: Vec<Vec<f64>>,
    lifted: Vec<f64>,
    deriv: Vec<Vec<f64>>,
    lift_work: crate::lift::LiftWork,
}

impl FaceScratch {
    fn new(ncomp: usize, np: usize, npf: usize, nderiv: usize, lift: &LiftFactorization) -> Self {
        Self {
            mine: vec![vec![0.0; npf]; ncomp],
            jump: vec![vec![0.0; npf]; ncomp],
            flux_a: vec![0.0; npf],
            flux_b: vec![vec![0.0; npf]; ncomp],
            lifted: vec![0.0; np],
            deriv: vec![vec![0.0; np]; nderiv],
            lift_work: lift.work(),
        }
    }
}

/// Acoustic semi-discrete right-hand side. Components are `[p, u_1..u_d]`.
///
/// The pressure slot is returned before the weight-adjusted mass inverse;
/// velocity slots are complete.
pub fn acoustic_rhs(
    state: &StateVec,
    mesh: &Mesh,
    maps: &TraceMaps,
    ops: &RefOperators,
    penalties: &PenaltyParams,
    bc: BoundaryKind,
    out: &mut StateVec,
) {
    let dim = ops.dim;
    let np = ops.np();
    let npf = ops.npf();
    let ncomp = 1 + dim;
    debug_assert_eq!(state.ncomp, ncomp);
    let blk = ncomp * np;

    out.data
        .par_chunks_mut(blk)
        .enumerate()
        .for_each_init(
            || FaceScratch::new(ncomp, np, npf, dim, &ops.lift),
            |scratch, (k, rhs)| {
                rhs.iter_mut().for_each(|v| *v = 0.0);
                let geo = &mesh.geo[k];
                let my = state.block(k);
                let (rhs_p, rhs_u) = rhs.split_at_mut(np);

                // Volume: rhs_p -= G_ij D_j u_i ; rhs_u_i -= G_ij D_j p.
                for j in 0..dim {
                    ops.tables.deriv_ref[j].apply(&my[..np], &mut scratch.deriv[j]);
                }
                for i in 0..dim {
                    let ui = &mut rhs_u[i * np..(i + 1) * np];
                    for j in 0..dim {
                        let gij = geo.g[i][j];
                        if gij == 0.0 {
                            continue;
                        }
                        for (o, d) in ui.iter_mut().zip(&scratch.deriv[j]) {
                            *o -= gij * d;
                        }
                    }
                }
                for i in 0..dim {
                    for j in 0..dim {
                        let gij = geo.g[i][j];
                        if gij == 0.0 {
                            continue;
                        }
                        ops.tables.deriv_ref[j]
                            .apply(&my[(1 + i) * np..(2 + i) * np], &mut scratch.deriv[j]);
                        for (o, d) in rhs_p.iter_mut().zip(&scratch.deriv[j]) {
                            *o -= gij * d;
                        }
                    }
                }

                // Surface terms, face by face.
                for m in 0..=dim {
                    let face = &mesh.faces[k][m];
                    let scale = face.jf / geo.jacobian;
                    let nrm = face.normal;
                    let tp = maps.my[m].as_slice();
                    for c in 0..ncomp {
                        let src = &my[c * np..(c + 1) * np];
                        for (slot, &vp) in tp.iter().enumerate() {
                            scratch.mine[c][slot] = src[vp as usize];
                        }
                    }
                    match face.neighbor {
                        Some((k2, _)) => {
                            let other = state.block(k2 as usize);
                            let gather = &maps.neighbor[k][m];
                            for c in 0..ncomp {
                                let src = &other[c * np..(c + 1) * np];
                                for (slot, &vp) in gather.iter().enumerate() {
                                    scratch.jump[c][slot] =
                                        src[vp as usize] - scratch.mine[c][slot];
                                }
                            }
                        }
                        None => match bc {
                            BoundaryKind::Reflect => {
                                // p+ = -p, u+ = u.
                                for slot in 0..npf {
                                    scratch.jump[0][slot] = -2.0 * scratch.mine[0][slot];
                                }
                                for c in 1..ncomp {
                                    scratch.jump[c].iter_mut().for_each(|v| *v = 0.0);
                                }
                            }
                            BoundaryKind::Extrapolate => {
                                for c in 0..ncomp {
                                    scratch.jump[c].iter_mut().for_each(|v| *v = 0.0);
                                }
                            }
                        },
                    }

                    // F_p = (tau_p [[p]] - n . [[u]]) / 2
                    // F_u = (tau_u [[u]] . n - [[p]]) / 2, lifted once then
                    // scattered with n_i.
                    for slot in 0..npf {
                        let mut un = 0.0;
                        for c in 0..dim {
                            un += nrm[c] * scratch.jump[1 + c][slot];
                        }
                        scratch.flux_a[slot] =
                            0.5 * (penalties.tau_p * scratch.jump[0][slot] - un);
                        scratch.flux_b[0][slot] =
                            0.5 * (penalties.tau_u * un - scratch.jump[0][slot]);
                    }
                    ops.lift
                        .apply_add_with(m, &scratch.flux_a, scale, rhs_p, &mut scratch.lift_work);
                    scratch.lifted.iter_mut().for_each(|v| *v = 0.0);
                    ops.lift.apply_add_with(
                        m,
                        &scratch.flux_b[0],
                        scale,
                        &mut scratch.lifted,
                        &mut scratch.lift_work,
                    );
                    for i in 0..dim {
                        let ni = nrm[i];
                        if ni == 0.0 {
                            continue;
                        }
                        let ui = &mut rhs_u[i * np..(i + 1) * np];
                        for (o, l) in ui.iter_mut().zip(&scratch.lifted) {
                            *o += ni * l;
                        }
                    }
                }
            },
        );
}

/// Stress components are ordered `(xx, yy, zz, yz, xz, xy)`; `A[i]` lists the
/// `(stress_row, velocity_col)` unit entries of the i-th direction matrix.
pub const ELASTIC_A: [[(usize, usize); 3]; 3] = [
    [(0, 0), (4, 2), (5, 1)],
    [(1, 1), (3, 2), (5, 0)],
    [(2, 2), (3, 1), (4, 0)],
];

pub const N_STRESS: usize = 6;
pub const N_VEL: usize = 3;

/// `A_n = sum_i n_i A_i` as a dense 6x3 matrix.
pub fn normal_matrix(nrm: &[f64; 3]) -> [[f64; N_VEL]; N_STRESS] {
    let mut an = [[0.0; N_VEL]; N_STRESS];
    for (i, list) in ELASTIC_A.iter().enumerate() {
        for &(s, v) in list {
            an[s][v] += nrm[i];
        }
    }
    an
}

/// Elastic semi-discrete right-hand side (3D). Components are
/// `[v_1, v_2, v_3, sxx, syy, szz, syz, sxz, sxy]`, all returned before the
/// weight-adjusted mass inverses.
pub fn elastic_rhs(
    state: &StateVec,
    mesh: &Mesh,
    maps: &TraceMaps,
    ops: &RefOperators,
    penalties: &PenaltyParams,
    bc: BoundaryKind,
    out: &mut StateVec,
) {
    assert_eq!(ops.dim, 3, "elastic path is three-dimensional");
    let dim = 3;
    let np = ops.np();
    let npf = ops.npf();
    let ncomp = N_VEL + N_STRESS;
    debug_assert_eq!(state.ncomp, ncomp);
    let blk = ncomp * np;

    out.data
        .par_chunks_mut(blk)
        .enumerate()
        .for_each_init(
            || FaceScratch::new(ncomp, np, npf, dim * N_STRESS, &ops.lift),
            |scratch, (k, rhs)| {
                rhs.iter_mut().for_each(|v| *v = 0.0);
                let geo = &mesh.geo[k];
                let my = state.block(k);

                // Volume velocity terms: dv_a += G_ij (A_i^T)_{a s} D_j sigma_s.
                for s in 0..N_STRESS {
                    for j in 0..dim {
                        ops.tables.deriv_ref[j].apply(
                            &my[(N_VEL + s) * np..(N_VEL + s + 1) * np],
                            &mut scratch.deriv[s * dim + j],
                        );
                    }
                }
                for (i, list) in ELASTIC_A.iter().enumerate() {
                    for &(s, a) in list {
                        for j in 0..dim {
                            let gij = geo.g[i][j];
                            if gij == 0.0 {
                                continue;
                            }
                            let dst = &mut rhs[a * np..(a + 1) * np];
                            for (o, d) in dst.iter_mut().zip(&scratch.deriv[s * dim + j]) {
                                *o += gij * d;
                            }
                        }
                    }
                }
                // Volume stress terms: dsigma_s += G_ij (A_i)_{s a} D_j v_a.
                for a in 0..N_VEL {
                    for j in 0..dim {
                        ops.tables.deriv_ref[j]
                            .apply(&my[a * np..(a + 1) * np], &mut scratch.deriv[a * dim + j]);
                    }
                }
                for (i, list) in ELASTIC_A.iter().enumerate() {
                    for &(s, a) in list {
                        for j in 0..dim {
                            let gij = geo.g[i][j];
                            if gij == 0.0 {
                                continue;
                            }
                            let dst = &mut rhs[(N_VEL + s) * np..(N_VEL + s + 1) * np];
                            for (o, d) in dst.iter_mut().zip(&scratch.deriv[a * dim + j]) {
                                *o += gij * d;
                            }
                        }
                    }
                }

                // Surface terms.
                for m in 0..=dim {
                    let face = &mesh.faces[k][m];
                    let scale = face.jf / geo.jacobian;
                    let an = normal_matrix(&face.normal);
                    let tp = maps.my[m].as_slice();
                    for c in 0..ncomp {
                        let src = &my[c * np..(c + 1) * np];
                        for (slot, &vp) in tp.iter().enumerate() {
                            scratch.mine[c][slot] = src[vp as usize];
                        }
                    }
                    match face.neighbor {
                        Some((k2, _)) => {
                            let other = state.block(k2 as usize);
                            let gather = &maps.neighbor[k][m];
                            for c in 0..ncomp {
                                let src = &other[c * np..(c + 1) * np];
                                for (slot, &vp) in gather.iter().enumerate() {
                                    scratch.jump[c][slot] =
                                        src[vp as usize] - scratch.mine[c][slot];
                                }
                            }
                        }
                        None => match bc {
                            BoundaryKind::Reflect => {
                                // Traction-free: v+ = v, stress jump -2 sigma.
                                for c in 0..N_VEL {
                                    scratch.jump[c].iter_mut().for_each(|v| *v = 0.0);
                                }
                                for s in 0..N_STRESS {
                                    for slot in 0..npf {
                                        scratch.jump[N_VEL + s][slot] =
                                            -2.0 * scratch.mine[N_VEL + s][slot];
                                    }
                                }
                            }
                            BoundaryKind::Extrapolate => {
                                for c in 0..ncomp {
                                    scratch.jump[c].iter_mut().for_each(|v| *v = 0.0);
                                }
                            }
                        },
                    }

                    // F_v = (A_n^T [[sigma]] + tau_v A_n^T A_n [[v]]) / 2.
                    for a in 0..N_VEL {
                        for slot in 0..npf {
                            let mut t = 0.0;
                            for s in 0..N_STRESS {
                                t += an[s][a] * scratch.jump[N_VEL + s][slot];
                            }
                            // (A_n^T A_n [[v]])_a = sum_s an[s][a] * sum_b an[s][b] jv_b
                            let mut q = 0.0;
                            for s in 0..N_STRESS {
                                if an[s][a] == 0.0 {
                                    continue;
                                }
                                let mut inner = 0.0;
                                for b in 0..N_VEL {
                                    inner += an[s][b] * scratch.jump[b][slot];
                                }
                                q += an[s][a] * inner;
                            }
                            scratch.flux_b[a][slot] = 0.5 * (t + penalties.tau_v * q);
                        }
                    }
                    // F_sigma = (A_n [[v]] + tau_sigma A_n A_n^T [[sigma]]) / 2.
                    for s in 0..N_STRESS {
                        for slot in 0..npf {
                            let mut r = 0.0;
                            for a in 0..N_VEL {
                                r += an[s][a] * scratch.jump[a][slot];
                            }
                            let mut w = 0.0;
                            for a in 0..N_VEL {
                                if an[s][a] == 0.0 {
                                    continue;
                                }
                                let mut inner = 0.0;
                                for s2 in 0..N_STRESS {
                                    inner += an[s2][a] * scratch.jump[N_VEL + s2][slot];
                                }
                                w += an[s][a] * inner;
                            }
                            scratch.flux_b[N_VEL + s][slot] =
                                0.5 * (r + penalties.tau_sigma * w);
                        }
                    }
                    for c in 0..ncomp {
                        ops.lift.apply_add_with(
                            m,
                            &scratch.flux_b[c],
                            scale,
                            &mut rhs[c * np..(c + 1) * np],
                            &mut scratch.lift_work,
                        );
                    }
                }
            },
        );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multi_index::IndexSet;

    fn lattice_coeffs(mesh: &Mesh, n: usize, f: impl Fn(&[f64; 3]) -> f64) -> Vec<Vec<f64>> {
        // Exact Bernstein coefficients of an affine function: lattice values.
        let set = IndexSet::new(n, mesh.dim);
        (0..mesh.num_elements())
            .map(|k| {
                set.iter()
                    .map(|a| {
                        let lam: Vec<f64> =
                            a.entries().iter().map(|&e| e as f64 / n as f64).collect();
                        f(&mesh.map_point(k, &lam))
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn constant_state_is_steady_acoustic() {
        for dim in 2..=3 {
            let n = 3;
            let mesh = Mesh::uniform(dim, 2).unwrap();
            let maps = TraceMaps::new(&mesh, n).unwrap();
            let ops = RefOperators::new(n, dim).unwrap();
            let ncomp = 1 + dim;
            let mut state = StateVec::zeros(mesh.num_elements(), ncomp, ops.np());
            for k in 0..mesh.num_elements() {
                for c in 0..ncomp {
                    state.comp_mut(k, c).iter_mut().for_each(|v| *v = 1.5 - c as f64);
                }
            }
            let mut rhs = StateVec::zeros(mesh.num_elements(), ncomp, ops.np());
            let taus = PenaltyParams {
                tau_p: 0.0,
                tau_u: 0.0,
                ..Default::default()
            };
            acoustic_rhs(
                &state,
                &mesh,
                &maps,
                &ops,
                &taus,
                BoundaryKind::Extrapolate,
                &mut rhs,
            );
            assert!(rhs.max_abs() < 1e-12, "d={dim}: {}", rhs.max_abs());
        }
    }

    #[test]
    fn linear_pressure_drives_unit_velocity() {
        let n = 2;
        let mesh = Mesh::uniform(2, 1).unwrap();
        let maps = TraceMaps::new(&mesh, n).unwrap();
        let ops = RefOperators::new(n, 2).unwrap();
        let mut state = StateVec::zeros(2, 3, ops.np());
        let p = lattice_coeffs(&mesh, n, |x| x[0]);
        for k in 0..2 {
            state.comp_mut(k, 0).copy_from_slice(&p[k]);
        }
        let mut rhs = StateVec::zeros(2, 3, ops.np());
        acoustic_rhs(
            &state,
            &mesh,
            &maps,
            &ops,
            &PenaltyParams::default(),
            BoundaryKind::Extrapolate,
            &mut rhs,
        );
        for k in 0..2 {
            for v in rhs.comp(k, 1) {
                assert!((v + 1.0).abs() < 1e-12, "du1/dt should be -1, got {v}");
            }
            for v in rhs.comp(k, 2) {
                assert!(v.abs() < 1e-12);
            }
            // Interior jump terms cancel: pressure slot sees no divergence.
            for v in rhs.comp(k, 0) {
                assert!(v.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_state_is_steady_elastic() {
        let n = 2;
        let mesh = Mesh::uniform(3, 1).unwrap();
        let maps = TraceMaps::new(&mesh, n).unwrap();
        let ops = RefOperators::new(n, 3).unwrap();
        let ncomp = 9;
        let mut state = StateVec::zeros(mesh.num_elements(), ncomp, ops.np());
        for k in 0..mesh.num_elements() {
            for c in 0..ncomp {
                state
                    .comp_mut(k, c)
                    .iter_mut()
                    .for_each(|v| *v = 0.3 * c as f64 - 1.0);
            }
        }
        let mut rhs = StateVec::zeros(mesh.num_elements(), ncomp, ops.np());
        let taus = PenaltyParams {
            tau_v: 0.0,
            tau_sigma: 0.0,
            ..Default::default()
        };
        elastic_rhs(
            &state,
            &mesh,
            &maps,
            &ops,
            &taus,
            BoundaryKind::Extrapolate,
            &mut rhs,
        );
        assert!(rhs.max_abs() < 1e-12, "{}", rhs.max_abs());
    }

    #[test]
    fn linear_velocity_excites_first_direction_stresses() {
        // v = (x, 0, 0): dsigma/dt = A_1 dv/dx = e_xx only.
        let n = 2;
        let mesh = Mesh::uniform(3, 1).unwrap();
        let maps = TraceMaps::new(&mesh, n).unwrap();
        let ops = RefOperators::new(n, 3).unwrap();
        let mut state = StateVec::zeros(mesh.num_elements(), 9, ops.np());
        let vx = lattice_coeffs(&mesh, n, |x| x[0]);
        for k in 0..mesh.num_elements() {
            state.comp_mut(k, 0).copy_from_slice(&vx[k]);
        }
        let mut rhs = StateVec::zeros(mesh.num_elements(), 9, ops.np());
        elastic_rhs(
            &state,
            &mesh,
            &maps,
            &ops,
            &PenaltyParams::default(),
            BoundaryKind::Extrapolate,
            &mut rhs,
        );
        for k in 0..mesh.num_elements() {
            for v in rhs.comp(k, N_VEL) {
                assert!((v - 1.0).abs() < 1e-12, "sxx rate should be 1, got {v}");
            }
            for c in (N_VEL + 1)..9 {
                for v in rhs.comp(k, c) {
                    assert!(v.abs() < 1e-12, "component {c} should be quiet");
                }
            }
            for c in 0..N_VEL {
                for v in rhs.comp(k, c) {
                    assert!(v.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn matched_traces_produce_no_surface_contribution() {
        // A globally continuous linear state has zero jumps; with tau = 0 the
        // surface terms must vanish identically, leaving pure volume terms.
        let n = 3;
        let mesh = Mesh::uniform(2, 2).unwrap();
        let maps = TraceMaps::new(&mesh, n).unwrap();
        let ops = RefOperators::new(n, 2).unwrap();
        let mut state = StateVec::zeros(mesh.num_elements(), 3, ops.np());
        let p = lattice_coeffs(&mesh, n, |x| 0.5 * x[0] - 0.25 * x[1]);
        let u1 = lattice_coeffs(&mesh, n, |x| x[1] * 0.75 + 0.5 * x[0]);
        for k in 0..mesh.num_elements() {
            state.comp_mut(k, 0).copy_from_slice(&p[k]);
            state.comp_mut(k, 1).copy_from_slice(&u1[k]);
        }
        let mut with_faces = StateVec::zeros(mesh.num_elements(), 3, ops.np());
        acoustic_rhs(
            &state,
            &mesh,
            &maps,
            &ops,
            &PenaltyParams {
                tau_p: 0.7,
                tau_u: 0.3,
                ..Default::default()
            },
            BoundaryKind::Extrapolate,
            &mut with_faces,
        );
        // Volume-only reference: constants du1/dx = 0.5, dp/dx = 0.5, dp/dy = -0.25
        for k in 0..mesh.num_elements() {
            for v in with_faces.comp(k, 0) {
                assert!((v + 0.5).abs() < 1e-13); // -du1/dx
            }
            for v in with_faces.comp(k, 1) {
                assert!((v + 0.5).abs() < 1e-13); // -dp/dx
            }
            for v in with_faces.comp(k, 2) {
                assert!((v - 0.25).abs() < 1e-13); // -dp/dy
            }
        }
    }
}

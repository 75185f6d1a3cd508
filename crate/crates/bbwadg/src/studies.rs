//! Manufactured-solution studies, the frequency sweep, the kernel complexity
//! benchmark, and the coefficient-table / roundoff reports.

use crate::bernstein::eigenvalue_table;
use crate::config::{MeshSpec, Mode, RunConfig, WavespeedModel};
use crate::error::Result;
use crate::multi_index::space_dim;
use crate::ops_counter;
use crate::output::{fmt_f64, CsvTable};
use crate::poly::{mass_inverse_coeffs, projection_coeffs, roundoff_study};
use crate::solver::Simulation;
use crate::wadg::{ScalarMaterial, WadgMode, WadgPipeline};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// One mesh level of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub cells: usize,
    pub h: f64,
    pub dofs: usize,
    pub steps: usize,
    pub error: f64,
    /// `log2(previous error / error)`, NaN on the first level.
    pub rate: f64,
}

/// Run the manufactured-solution sweep over uniform mesh refinements.
pub fn convergence_study(base: &RunConfig, cell_counts: &[usize]) -> Result<Vec<ConvergenceRow>> {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &cells in cell_counts {
        let mut cfg = base.clone();
        cfg.mesh = MeshSpec::Uniform(cells);
        let sim = Simulation::new(cfg)?;
        let out = sim.run(0)?;
        let error = out.final_error_p.expect("manufactured run");
        let rate = rows
            .last()
            .map(|p: &ConvergenceRow| (p.error / error).log2())
            .unwrap_or(f64::NAN);
        rows.push(ConvergenceRow {
            cells,
            h: 2.0 / cells as f64,
            dofs: sim.mesh.num_elements() * space_dim(base.n, base.dim),
            steps: out.steps,
            error,
            rate,
        });
    }
    Ok(rows)
}

pub fn convergence_csv(base: &RunConfig, rows: &[ConvergenceRow]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "system", "dim", "n", "m", "mode", "cells", "h", "dofs", "steps", "l2_error", "rate",
    ]);
    for r in rows {
        t.push(vec![
            format!("{:?}", base.system).to_lowercase(),
            base.dim.to_string(),
            base.n.to_string(),
            base.m.to_string(),
            format!("{:?}", base.mode).to_lowercase(),
            r.cells.to_string(),
            fmt_f64(r.h),
            r.dofs.to_string(),
            r.steps.to_string(),
            fmt_f64(r.error),
            fmt_f64(r.rate),
        ]);
    }
    t
}

/// One point of the frequency study.
#[derive(Debug, Clone)]
pub struct FrequencyRow {
    pub k: f64,
    pub m: usize,
    pub error: f64,
}

/// Error versus weight degree `M` for each wavespeed frequency `k`, at a
/// fixed mesh and order.
pub fn frequency_study(
    base: &RunConfig,
    ks: &[f64],
    ms: &[usize],
) -> Result<Vec<FrequencyRow>> {
    let mut rows = Vec::new();
    for &k in ks {
        for &m in ms {
            let mut cfg = base.clone();
            cfg.wavespeed = WavespeedModel::Sine { k };
            cfg.m = m;
            let sim = Simulation::new(cfg)?;
            let out = sim.run(0)?;
            rows.push(FrequencyRow {
                k,
                m,
                error: out.final_error_p.expect("manufactured run"),
            });
        }
    }
    Ok(rows)
}

pub fn frequency_csv(base: &RunConfig, rows: &[FrequencyRow]) -> CsvTable {
    let mut t = CsvTable::new(&["dim", "n", "mesh_cells", "k", "m", "l2_error"]);
    let cells = match &base.mesh {
        MeshSpec::Uniform(c) => *c,
        MeshSpec::Gmsh(_) => 0,
    };
    for r in rows {
        t.push(vec![
            base.dim.to_string(),
            base.n.to_string(),
            cells.to_string(),
            fmt_f64(r.k),
            r.m.to_string(),
            fmt_f64(r.error),
        ]);
    }
    t
}

/// One benchmark point: per-element cost of the weight-adjusted update.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub n: usize,
    pub m: usize,
    pub mode: Mode,
    pub madds_per_element: f64,
    pub nanos_per_element: f64,
}

/// Measure counted multiply-adds and wall time of the scalar update kernel on
/// a synthetic population of elements.
pub fn kernel_benchmark(
    n_range: &[usize],
    m: usize,
    dim: usize,
    elements: usize,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    assert!(elements >= 1 && repetitions >= 1);
    let mut rows = Vec::new();
    let max_n = n_range.iter().copied().max().unwrap_or(1);
    let eigs = eigenvalue_table(max_n + m, dim)?;
    for &n in n_range {
        let pipeline = WadgPipeline::new(n, m, dim, &eigs)?;
        let np = pipeline.np();
        let mp = space_dim(m, dim);
        let nq = pipeline.num_points();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
        // Synthetic per-element weights (positive) and payloads.
        let mut coeffs = Vec::with_capacity(elements);
        let mut values = Vec::with_capacity(elements);
        for _ in 0..elements {
            let c: Vec<f64> = (0..mp).map(|_| 0.5 + rng.random::<f64>()).collect();
            let vq_m = crate::bernstein::eval_matrix_rule(m, dim, &pipeline.quad.rule);
            let mut v = vec![0.0; nq];
            vq_m.matvec(&c, &mut v);
            coeffs.push(c);
            values.push(v);
        }
        let material = ScalarMaterial {
            m,
            coeffs,
            values_projected: values.clone(),
            values_exact: values,
            min_value: 0.5,
            max_value: 1.5,
        };
        let payload: Vec<Vec<f64>> = (0..elements)
            .map(|_| (0..np).map(|_| rng.random::<f64>() - 0.5).collect())
            .collect();

        for mode in [Mode::Fast, Mode::Oracle] {
            let wmode = match mode {
                Mode::Fast => WadgMode::BernsteinFast,
                _ => WadgMode::QuadratureOracle,
            };
            let mut scratch = pipeline.scratch();
            let mut u = vec![0.0; np];
            // Warmup.
            for _ in 0..10 {
                for k in 0..elements {
                    u.copy_from_slice(&payload[k]);
                    pipeline
                        .apply_scalar(wmode, &material.element(k), &mut u, &mut scratch)
                        .unwrap();
                }
            }
            ops_counter::reset_all();
            let start = Instant::now();
            for _ in 0..repetitions {
                for k in 0..elements {
                    u.copy_from_slice(&payload[k]);
                    pipeline
                        .apply_scalar(wmode, &material.element(k), &mut u, &mut scratch)
                        .unwrap();
                }
            }
            let elapsed = start.elapsed().as_nanos() as f64;
            let applies = (repetitions * elements) as f64;
            let madds = match mode {
                Mode::Fast => {
                    ops_counter::FAST_MULTIPLY.get() + ops_counter::FAST_PROJECT.get()
                }
                _ => ops_counter::ORACLE_APPLY.get(),
            } as f64;
            rows.push(BenchRow {
                n,
                m,
                mode,
                madds_per_element: madds / applies,
                nanos_per_element: elapsed / applies,
            });
        }
    }
    Ok(rows)
}

pub fn bench_csv(dim: usize, rows: &[BenchRow]) -> CsvTable {
    let mut t = CsvTable::new(&["dim", "n", "m", "mode", "madds_per_element", "ns_per_element"]);
    for r in rows {
        t.push(vec![
            dim.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            format!("{:?}", r.mode).to_lowercase(),
            fmt_f64(r.madds_per_element),
            fmt_f64(r.nanos_per_element),
        ]);
    }
    t
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Effective per-dimension problem size `(d! N_p)^{1/d}`; equals N + O(1) and
/// converges to N, so slopes measured against it recover the asymptotic
/// exponent without the binomial prefactor bias that dominates at N <= 8.
pub fn effective_degree(n: usize, dim: usize) -> f64 {
    let np = space_dim(n, dim) as f64;
    let dfac = crate::multi_index::factorial(dim);
    (dfac * np).powf(1.0 / dim as f64)
}

/// Projection coefficient table rows (per N, M) as CSV.
pub fn coeffs_csv(pairs: &[(usize, usize)], dim: usize) -> Result<CsvTable> {
    let max_total = pairs.iter().map(|&(n, m)| n + m).max().unwrap_or(1);
    let eigs = eigenvalue_table(max_total, dim)?;
    let mut t = CsvTable::new(&["kind", "dim", "n", "m", "j", "c_j"]);
    for &(n, m) in pairs {
        let c = projection_coeffs(n, m, &eigs)?;
        for (j, v) in c.iter().enumerate() {
            t.push(vec![
                "projection".into(),
                dim.to_string(),
                n.to_string(),
                m.to_string(),
                j.to_string(),
                fmt_f64(*v),
            ]);
        }
    }
    Ok(t)
}

/// Mass-inverse coefficient table plus condition numbers as CSV.
pub fn mass_coeffs_csv(ns: &[usize], dim: usize) -> Result<CsvTable> {
    let max_n = ns.iter().copied().max().unwrap_or(1);
    let eigs = eigenvalue_table(max_n, dim)?;
    let mut t = CsvTable::new(&["kind", "dim", "n", "j", "c_j", "cond"]);
    for &n in ns {
        let (c, cond) = mass_inverse_coeffs(n, &eigs)?;
        for (j, v) in c.iter().enumerate() {
            t.push(vec![
                "mass_inverse".into(),
                dim.to_string(),
                n.to_string(),
                j.to_string(),
                fmt_f64(*v),
                fmt_f64(cond),
            ]);
        }
    }
    Ok(t)
}

/// Roundoff comparison of the decomposed mass inverse against a direct solve.
pub fn roundoff_csv(n_max: usize, dim: usize) -> Result<CsvTable> {
    let rows = roundoff_study(1..=n_max, dim)?;
    let mut t = CsvTable::new(&["dim", "n", "cond", "residual_decomposed", "residual_direct"]);
    for r in rows {
        t.push(vec![
            dim.to_string(),
            r.n.to_string(),
            fmt_f64(r.cond),
            fmt_f64(r.residual_decomposed),
            fmt_f64(r.residual_direct),
        ]);
    }
    Ok(t)
}

/// Fast-versus-oracle equivalence battery on random positive polynomial
/// weights; returns the worst per-element coefficient discrepancy.
pub fn oracle_equivalence_battery(
    dims: &[usize],
    n_max: usize,
    m_max: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &dim in dims {
        let eigs = eigenvalue_table(n_max + m_max, dim)?;
        for n in 1..=n_max {
            for m in 0..=m_max {
                let pipeline = WadgPipeline::new(n, m, dim, &eigs)?;
                let np = pipeline.np();
                let mp = space_dim(m, dim);
                let nq = pipeline.num_points();
                let vq_m = crate::bernstein::eval_matrix_rule(m, dim, &pipeline.quad.rule);
                let mut scratch = pipeline.scratch();
                for _ in 0..trials {
                    let wc: Vec<f64> = (0..mp).map(|_| 0.5 + rng.random::<f64>()).collect();
                    let mut wv = vec![0.0; nq];
                    vq_m.matvec(&wc, &mut wv);
                    let material = ScalarMaterial {
                        m,
                        coeffs: vec![wc],
                        values_projected: vec![wv.clone()],
                        values_exact: vec![wv],
                        min_value: 0.5,
                        max_value: 1.5,
                    };
                    let u0: Vec<f64> = (0..np).map(|_| rng.random::<f64>() - 0.5).collect();
                    let mut fast = u0.clone();
                    pipeline.apply_scalar(
                        WadgMode::BernsteinFast,
                        &material.element(0),
                        &mut fast,
                        &mut scratch,
                    )?;
                    let mut oracle = u0.clone();
                    pipeline.apply_scalar(
                        WadgMode::QuadratureOracle,
                        &material.element(0),
                        &mut oracle,
                        &mut scratch,
                    )?;
                    for (a, b) in fast.iter().zip(&oracle) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglog_slope_recovers_power() {
        let xs = [2.0, 3.0, 4.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(4)).collect();
        assert!((loglog_slope(&xs, &ys) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn effective_degree_tracks_n() {
        // (d! Np)^(1/d) = ((N+1)(N+2)(N+3))^(1/3) for d = 3.
        let e = effective_degree(4, 3);
        assert!((e - (5.0f64 * 6.0 * 7.0).powf(1.0 / 3.0)).abs() < 1e-12);
        assert!(effective_degree(30, 3) / 30.0 < 1.1);
    }

    #[test]
    fn bench_produces_monotone_counts() {
        let rows = kernel_benchmark(&[2, 3], 1, 3, 8, 2, 0).unwrap();
        let fast: Vec<&BenchRow> = rows.iter().filter(|r| r.mode == Mode::Fast).collect();
        assert!(fast[1].madds_per_element > fast[0].madds_per_element);
        let oracle: Vec<&BenchRow> = rows.iter().filter(|r| r.mode == Mode::Oracle).collect();
        assert!(oracle[1].madds_per_element > oracle[0].madds_per_element);
    }

    #[test]
    fn equivalence_battery_is_tight_small() {
        let worst = oracle_equivalence_battery(&[2], 3, 1, 2, 7).unwrap();
        assert!(worst < 1e-11, "{worst}");
    }
}

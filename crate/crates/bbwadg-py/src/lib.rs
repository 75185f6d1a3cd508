//! Python bindings exposing the main bbwadg types and operations:
//! coefficient tables, Bernstein polynomial algebra, the two weight-adjusted
//! update paths, and the simulation driver.

use bbwadg::bernstein::eigenvalue_table;
use bbwadg::config::RunConfig;
use bbwadg::multi_index::space_dim;
use bbwadg::poly;
use bbwadg::solver::Simulation;
use bbwadg::studies;
use bbwadg::wadg::{ScalarMaterial, WadgMode, WadgPipeline};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Dimension of the degree-n polynomial space on a d-simplex.
#[pyfunction]
fn polynomial_space_dim(n: usize, dim: usize) -> usize {
    space_dim(n, dim)
}

/// Distinct Bernstein mass-matrix eigenvalues by modal degree.
#[pyfunction]
fn mass_eigenvalues(n: usize, dim: usize) -> PyResult<Vec<f64>> {
    Ok(eigenvalue_table(n, dim)
        .map_err(err)?
        .pop()
        .expect("table is nonempty"))
}

/// Projection decomposition coefficients c_0..c_N for P^{N+M}_N.
#[pyfunction]
fn projection_coeffs(n: usize, m: usize, dim: usize) -> PyResult<Vec<f64>> {
    let eigs = eigenvalue_table(n + m, dim).map_err(err)?;
    poly::projection_coeffs(n, m, &eigs).map_err(err)
}

/// Mass-inverse decomposition coefficients and their condition number.
#[pyfunction]
fn mass_inverse_coeffs(n: usize, dim: usize) -> PyResult<(Vec<f64>, f64)> {
    let eigs = eigenvalue_table(n, dim).map_err(err)?;
    poly::mass_inverse_coeffs(n, &eigs).map_err(err)
}

/// Bernstein coefficients of the product of a degree-n and degree-m
/// polynomial.
#[pyfunction]
fn multiply(f: Vec<f64>, g: Vec<f64>, n: usize, m: usize, dim: usize) -> PyResult<Vec<f64>> {
    let stencil = poly::MultiplicationStencil::new(n, m, dim);
    let mut out = vec![0.0; stencil.output_len()];
    stencil.apply(&f, &g, &mut out).map_err(err)?;
    Ok(out)
}

/// Telescoping L2 projection of degree-(n+m) coefficients onto degree n.
#[pyfunction]
fn project_telescoping(u: Vec<f64>, n: usize, m: usize, dim: usize) -> PyResult<Vec<f64>> {
    let eigs = eigenvalue_table(n + m, dim).map_err(err)?;
    let decomp = poly::ProjectionDecomposition::new(n, m, dim, &eigs).map_err(err)?;
    let mut out = vec![0.0; space_dim(n, dim)];
    decomp.apply(&u, &mut out).map_err(err)?;
    Ok(out)
}

/// Dense quadrature-built projection matrix (row-major), the reference for
/// the telescoped form.
#[pyfunction]
fn projection_dense(n: usize, m: usize, dim: usize) -> PyResult<Vec<Vec<f64>>> {
    let rule = bbwadg::quadrature::QuadratureRule::simplex(dim, 2 * n + m + 2);
    let p = poly::projection_direct(n, m, dim, &rule);
    Ok((0..p.nrows).map(|i| p.row(i).to_vec()).collect())
}

/// Weight-adjusted apply of a positive degree-m polynomial weight to
/// degree-n coefficients; `fast` picks the Bernstein path, otherwise the
/// quadrature path runs.
#[pyfunction]
fn wadg_apply(
    u: Vec<f64>,
    weight_coeffs: Vec<f64>,
    n: usize,
    m: usize,
    dim: usize,
    fast: bool,
) -> PyResult<Vec<f64>> {
    let eigs = eigenvalue_table(n + m, dim).map_err(err)?;
    let pipeline = WadgPipeline::new(n, m, dim, &eigs).map_err(err)?;
    if weight_coeffs.len() != space_dim(m, dim) {
        return Err(PyValueError::new_err("weight coefficient count mismatch"));
    }
    let vq_m = bbwadg::bernstein::eval_matrix_rule(m, dim, &pipeline.quad.rule);
    let mut values = vec![0.0; pipeline.num_points()];
    vq_m.matvec(&weight_coeffs, &mut values);
    if values.iter().any(|&v| v <= 0.0) {
        return Err(PyValueError::new_err("weight must be strictly positive"));
    }
    let material = ScalarMaterial {
        m,
        coeffs: vec![weight_coeffs],
        values_projected: vec![values.clone()],
        values_exact: vec![values],
        min_value: 0.0,
        max_value: 0.0,
    };
    let mode = if fast {
        WadgMode::BernsteinFast
    } else {
        WadgMode::QuadratureOracle
    };
    let mut out = u;
    let mut scratch = pipeline.scratch();
    pipeline
        .apply_scalar(mode, &material.element(0), &mut out, &mut scratch)
        .map_err(err)?;
    Ok(out)
}

/// Run a simulation from a JSON config string; returns
/// `(dt, steps, final_pressure_error_or_None)`.
#[pyfunction]
fn solve(config_json: &str) -> PyResult<(f64, usize, Option<f64>)> {
    let cfg = RunConfig::from_json(config_json).map_err(err)?;
    let sim = Simulation::new(cfg).map_err(err)?;
    let out = sim.run(0).map_err(err)?;
    Ok((out.dt, out.steps, out.final_error_p))
}

/// Mesh-refinement study; returns rows of `(cells, h, error, rate)`.
#[pyfunction]
fn convergence(config_json: &str, cells: Vec<usize>) -> PyResult<Vec<(usize, f64, f64, f64)>> {
    let cfg = RunConfig::from_json(config_json).map_err(err)?;
    let rows = studies::convergence_study(&cfg, &cells).map_err(err)?;
    Ok(rows
        .iter()
        .map(|r| (r.cells, r.h, r.error, r.rate))
        .collect())
}

#[pymodule]
fn bbwadg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(polynomial_space_dim, m)?)?;
    m.add_function(wrap_pyfunction!(mass_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(projection_coeffs, m)?)?;
    m.add_function(wrap_pyfunction!(mass_inverse_coeffs, m)?)?;
    m.add_function(wrap_pyfunction!(multiply, m)?)?;
    m.add_function(wrap_pyfunction!(project_telescoping, m)?)?;
    m.add_function(wrap_pyfunction!(projection_dense, m)?)?;
    m.add_function(wrap_pyfunction!(wadg_apply, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    Ok(())
}

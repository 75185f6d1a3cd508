//! CSV and legacy-VTK writers.

use crate::error::Result;
use crate::kernels::StateVec;
use crate::mesh::Mesh;
use crate::multi_index::IndexSet;
use std::fmt::Write as _;
use std::path::Path;

/// Full round-trip precision float formatting (shortest string that parses
/// back to the same f64).
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// A CSV table with a header row; values are written at full precision.
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, fields: Vec<String>) {
        debug_assert_eq!(fields.len(), self.header.len());
        self.rows.push(fields);
    }

    pub fn to_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.to_string())?;
        Ok(())
    }
}

/// Legacy ASCII VTK unstructured-grid snapshot, one scalar field per
/// component. Fields are sampled at element vertices; `subsample > 0`
/// refines each 2D element into a barycentric lattice triangulation (for 3D
/// the vertex sampling is kept and the level is ignored).
pub fn write_vtk(
    path: &Path,
    mesh: &Mesh,
    state: &StateVec,
    names: &[&str],
    n: usize,
    subsample: usize,
) -> Result<()> {
    let dim = mesh.dim;
    let mut points: Vec<[f64; 3]> = Vec::new();
    let mut cells: Vec<Vec<usize>> = Vec::new();
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); names.len()];

    // Per-element barycentric sample lattice of degree s (vertices for s=1).
    let s = if dim == 2 { subsample.max(1) } else { 1 };
    let lattice = IndexSet::new(s, dim);
    let vert_count = lattice.len();
    for k in 0..mesh.num_elements() {
        let base = points.len();
        let mut lat_pos = std::collections::HashMap::new();
        for (i, a) in lattice.iter().enumerate() {
            let lam: Vec<f64> = a.entries().iter().map(|&e| e as f64 / s as f64).collect();
            points.push(mesh.map_point(k, &lam));
            lat_pos.insert(*a, base + i);
            // Evaluate each component at this barycentric point.
            let mut bary = [0.0f64; 4];
            for (slot, l) in lam.iter().enumerate() {
                bary[slot] = *l;
            }
            let basis = crate::bernstein::eval_bernstein(n, dim, &[bary])?;
            for (c, field) in samples.iter_mut().enumerate() {
                let coeffs = state.comp(k, c);
                let mut v = 0.0;
                for (col, coef) in coeffs.iter().enumerate() {
                    v += basis[(0, col)] * coef;
                }
                field.push(v);
            }
        }
        if dim == 2 {
            // Upward and downward sub-triangles of the lattice.
            for a in lattice.iter() {
                if a.get(0) >= 1 {
                    let p0 = lat_pos[a];
                    let p1 = lat_pos[&a.lowered(0).unwrap().raised(1)];
                    let p2 = lat_pos[&a.lowered(0).unwrap().raised(2)];
                    cells.push(vec![p0, p1, p2]);
                }
                if a.get(0) >= 2 {
                    let b = a.lowered(0).unwrap();
                    let p1 = lat_pos[&b.raised(1)];
                    let p2 = lat_pos[&b.raised(2)];
                    let p3 = lat_pos[&b.lowered(0).unwrap().raised(1).raised(2)];
                    cells.push(vec![p1, p3, p2]);
                }
            }
        } else {
            cells.push((0..vert_count).map(|i| base + i).collect());
        }
    }

    let mut text = String::new();
    let _ = writeln!(text, "# vtk DataFile Version 3.0");
    let _ = writeln!(text, "bbwadg snapshot");
    let _ = writeln!(text, "ASCII");
    let _ = writeln!(text, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(text, "POINTS {} double", points.len());
    for p in &points {
        let _ = writeln!(text, "{} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]));
    }
    let total: usize = cells.iter().map(|c| c.len() + 1).sum();
    let _ = writeln!(text, "CELLS {} {}", cells.len(), total);
    for c in &cells {
        let ids: Vec<String> = c.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(text, "{} {}", c.len(), ids.join(" "));
    }
    let _ = writeln!(text, "CELL_TYPES {}", cells.len());
    let cell_type = if dim == 2 { 5 } else { 10 };
    for _ in &cells {
        let _ = writeln!(text, "{cell_type}");
    }
    let _ = writeln!(text, "POINT_DATA {}", points.len());
    for (c, name) in names.iter().enumerate() {
        let _ = writeln!(text, "SCALARS {name} double 1");
        let _ = writeln!(text, "LOOKUP_TABLE default");
        for v in &samples[c] {
            let _ = writeln!(text, "{}", fmt_f64(*v));
        }
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

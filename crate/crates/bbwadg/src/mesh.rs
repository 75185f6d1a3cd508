//! Simplicial meshes: uniform generation, affine geometric factors, face
//! connectivity and Bernstein face-trace maps.

use crate::error::{Error, Result};
use crate::multi_index::IndexSet;
use crate::simplex::ReferenceSimplex;
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct ElementGeometry {
    /// Volume Jacobian: physical volume / reference volume, positive.
    pub jacobian: f64,
    /// `g[i][j] = d(ref coord j) / d(phys coord i)`, constant per element.
    pub g: [[f64; 3]; 3],
    /// Twice the inradius; the mesh-size measure used for time steps.
    pub h: f64,
}

#[derive(Debug, Clone)]
pub struct FaceInfo {
    /// Face Jacobian: physical face measure / bi-unit face measure.
    pub jf: f64,
    /// Outward unit normal.
    pub normal: [f64; 3],
    /// Neighbor element and its local face index; `None` on the boundary.
    pub neighbor: Option<(u32, u8)>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub dim: usize,
    pub vertices: Vec<[f64; 3]>,
    pub elements: Vec<[u32; 4]>,
    pub geo: Vec<ElementGeometry>,
    pub faces: Vec<Vec<FaceInfo>>,
}

impl Mesh {
    /// Uniform mesh of `[-1, 1]^d`: squares split into 2 triangles or cubes
    /// split into 6 tetrahedra sharing the main diagonal, `h = 2 / cells`.
    pub fn uniform(dim: usize, cells: usize) -> Result<Self> {
        assert!(cells >= 1);
        let n = cells;
        let h = 2.0 / n as f64;
        let coord = |i: usize| -1.0 + h * i as f64;
        let mut vertices = Vec::new();
        let mut elements: Vec<[u32; 4]> = Vec::new();
        if dim == 2 {
            let vid = |i: usize, j: usize| (j * (n + 1) + i) as u32;
            for j in 0..=n {
                for i in 0..=n {
                    vertices.push([coord(i), coord(j), 0.0]);
                }
            }
            for j in 0..n {
                for i in 0..n {
                    let (v00, v10) = (vid(i, j), vid(i + 1, j));
                    let (v01, v11) = (vid(i, j + 1), vid(i + 1, j + 1));
                    elements.push([v00, v10, v11, 0]);
                    elements.push([v00, v11, v01, 0]);
                }
            }
        } else {
            let vid =
                |i: usize, j: usize, k: usize| (k * (n + 1) * (n + 1) + j * (n + 1) + i) as u32;
            for k in 0..=n {
                for j in 0..=n {
                    for i in 0..=n {
                        vertices.push([coord(i), coord(j), coord(k)]);
                    }
                }
            }
            // Six tetrahedra per cube, all containing the main diagonal
            // c000 -> c111 so neighboring cubes conform.
            const PERMS: [[usize; 3]; 6] = [
                [0, 1, 2],
                [0, 2, 1],
                [1, 0, 2],
                [1, 2, 0],
                [2, 0, 1],
                [2, 1, 0],
            ];
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        let base = [i, j, k];
                        for perm in PERMS {
                            let mut p = base;
                            let mut quad = [vid(p[0], p[1], p[2]), 0, 0, 0];
                            for (step, &axis) in perm.iter().enumerate() {
                                p[axis] += 1;
                                quad[step + 1] = vid(p[0], p[1], p[2]);
                            }
                            elements.push(quad);
                        }
                    }
                }
            }
        }
        Self::from_raw(dim, vertices, elements)
    }

    /// Assemble geometry and connectivity from raw vertices and elements,
    /// repairing orientation so every Jacobian is positive.
    pub fn from_raw(
        dim: usize,
        vertices: Vec<[f64; 3]>,
        mut elements: Vec<[u32; 4]>,
    ) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Mesh("mesh has no elements".into()));
        }
        let simp = ReferenceSimplex::new(dim);
        let nv = dim + 1;
        for quad in &elements {
            for &v in &quad[..nv] {
                if v as usize >= vertices.len() {
                    return Err(Error::Mesh(format!("vertex reference {v} out of range")));
                }
            }
        }
        // Orientation repair: swap the last two vertices when J < 0.
        for quad in elements.iter_mut() {
            if signed_jacobian(dim, &vertices, quad) < 0.0 {
                quad.swap(nv - 2, nv - 1);
            }
        }

        let mut geo = Vec::with_capacity(elements.len());
        let mut faces: Vec<Vec<FaceInfo>> = Vec::with_capacity(elements.len());
        for quad in &elements {
            let j_signed = signed_jacobian(dim, &vertices, quad);
            let verts: Vec<[f64; 3]> = quad[..nv].iter().map(|&v| vertices[v as usize]).collect();
            let diam = max_edge(dim, &verts);
            if j_signed <= 1e-14 * diam.powi(dim as i32) {
                return Err(Error::Mesh(format!(
                    "degenerate element with Jacobian {j_signed:.3e}"
                )));
            }
            // The affine map built from the vertices must reproduce them.
            for (r, rv) in simp.vertices().iter().enumerate() {
                let lam = simp.barycentric(&rv[..dim]);
                let mut x = [0.0f64; 3];
                for (i, l) in lam.iter().enumerate().take(nv) {
                    for c in 0..3 {
                        x[c] += l * verts[i][c];
                    }
                }
                for c in 0..dim {
                    if (x[c] - verts[r][c]).abs() > 1e-12 * diam.max(1.0) {
                        return Err(Error::Mesh("affine map identity check failed".into()));
                    }
                }
            }

            let g = inverse_map_gradient(dim, &verts);
            let volume = j_signed * simp.measure();
            let mut face_infos = Vec::with_capacity(nv);
            let mut area_sum = 0.0;
            for m in 0..nv {
                let fv: Vec<[f64; 3]> = simp.face_vertices(m).iter().map(|&i| verts[i]).collect();
                let measure = face_measure(dim, &fv);
                area_sum += measure;
                let normal = outward_normal(dim, &verts, &fv);
                face_infos.push(FaceInfo {
                    jf: measure / simp.face_parameter_measure(),
                    normal,
                    neighbor: None,
                });
            }
            let h = 2.0 * (dim as f64) * volume / area_sum;
            geo.push(ElementGeometry {
                jacobian: j_signed,
                g,
                h,
            });
            faces.push(face_infos);
        }

        // Connectivity: faces paired by their sorted global vertex tuple.
        let mut table: HashMap<Vec<u32>, (u32, u8)> = HashMap::new();
        for (k, quad) in elements.iter().enumerate() {
            for m in 0..nv {
                let mut key: Vec<u32> = simp.face_vertices(m).iter().map(|&i| quad[i]).collect();
                key.sort_unstable();
                if let Some((k2, m2)) = table.remove(&key) {
                    faces[k][m].neighbor = Some((k2, m2));
                    faces[k2 as usize][m2 as usize].neighbor = Some((k as u32, m as u8));
                } else {
                    table.insert(key, (k as u32, m as u8));
                }
            }
        }

        Ok(Self {
            dim,
            vertices,
            elements,
            geo,
            faces,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn total_volume(&self) -> f64 {
        let ref_measure = ReferenceSimplex::new(self.dim).measure();
        self.geo.iter().map(|g| g.jacobian * ref_measure).sum()
    }

    pub fn h_min(&self) -> f64 {
        self.geo.iter().map(|g| g.h).fold(f64::INFINITY, f64::min)
    }

    /// Physical coordinates of a barycentric point inside element `k`.
    pub fn map_point(&self, k: usize, lam: &[f64]) -> [f64; 3] {
        let quad = &self.elements[k];
        let mut x = [0.0; 3];
        for (i, &l) in lam.iter().enumerate().take(self.dim + 1) {
            let v = self.vertices[quad[i] as usize];
            for c in 0..3 {
                x[c] += l * v[c];
            }
        }
        x
    }
}

fn signed_jacobian(dim: usize, vertices: &[[f64; 3]], quad: &[u32; 4]) -> f64 {
    let v0 = vertices[quad[0] as usize];
    if dim == 2 {
        let a = sub(vertices[quad[1] as usize], v0);
        let b = sub(vertices[quad[2] as usize], v0);
        (a[0] * b[1] - a[1] * b[0]) / 4.0
    } else {
        let a = sub(vertices[quad[1] as usize], v0);
        let b = sub(vertices[quad[2] as usize], v0);
        let c = sub(vertices[quad[3] as usize], v0);
        dot(&cross(&a, &b), &c) / 8.0
    }
}

/// `g[i][j] = d(ref_j)/d(x_i)`: inverse of the forward map matrix whose
/// columns are `(v_{j+1} - v_0)/2`, transposed into physical-major order.
fn inverse_map_gradient(dim: usize, verts: &[[f64; 3]]) -> [[f64; 3]; 3] {
    let mut a = [[0.0f64; 3]; 3];
    for j in 0..dim {
        let col = sub(verts[j + 1], verts[0]);
        for i in 0..dim {
            a[i][j] = col[i] / 2.0;
        }
    }
    if dim == 2 {
        a[2][2] = 1.0;
    }
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    let mut inv = [[0.0f64; 3]; 3];
    inv[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
    inv[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
    inv[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
    inv[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
    inv[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
    inv[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
    inv[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
    inv[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
    inv[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
    // Row j of inv is the gradient of ref coordinate j; store g[i][j].
    let mut g = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = inv[j][i];
        }
    }
    g
}

fn face_measure(dim: usize, fv: &[[f64; 3]]) -> f64 {
    if dim == 2 {
        norm(&sub(fv[1], fv[0]))
    } else {
        let a = sub(fv[1], fv[0]);
        let b = sub(fv[2], fv[0]);
        norm(&cross(&a, &b)) / 2.0
    }
}

fn outward_normal(dim: usize, verts: &[[f64; 3]], fv: &[[f64; 3]]) -> [f64; 3] {
    let mut n = if dim == 2 {
        let t = sub(fv[1], fv[0]);
        [t[1], -t[0], 0.0]
    } else {
        cross(&sub(fv[1], fv[0]), &sub(fv[2], fv[0]))
    };
    let len = norm(&n);
    for c in n.iter_mut() {
        *c /= len;
    }
    let mut fc = [0.0f64; 3];
    for v in fv {
        for c in 0..3 {
            fc[c] += v[c] / fv.len() as f64;
        }
    }
    let mut ec = [0.0f64; 3];
    for v in verts {
        for c in 0..3 {
            ec[c] += v[c] / verts.len() as f64;
        }
    }
    let out = sub(fc, ec);
    if dot(&n, &out) < 0.0 {
        for c in n.iter_mut() {
            *c = -*c;
        }
    }
    n
}

fn max_edge(dim: usize, verts: &[[f64; 3]]) -> f64 {
    let mut m = 0.0f64;
    for i in 0..=dim {
        for j in i + 1..=dim {
            m = m.max(norm(&sub(verts[j], verts[i])));
        }
    }
    m
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Degree-N face-trace connectivity: for each interior element face, the
/// neighbor's volume coefficient positions aligned with this face's own
/// trace ordering.
#[derive(Debug, Clone)]
pub struct TraceMaps {
    pub n: usize,
    /// `my[m]` lists volume positions of face `m`'s trace, in face order.
    pub my: Vec<Vec<u32>>,
    /// `neighbor[k][m][i]`: neighbor volume position matching my i-th face
    /// dof on face `m` of element `k`; empty on the boundary.
    pub neighbor: Vec<Vec<Vec<u32>>>,
}

impl TraceMaps {
    pub fn new(mesh: &Mesh, n: usize) -> Result<Self> {
        let dim = mesh.dim;
        let fdim = dim - 1;
        let simp = ReferenceSimplex::new(dim);
        let vol = IndexSet::new(n, dim);
        let fset = IndexSet::new(n, fdim);

        // Reference-level trace positions per local face.
        let mut my = Vec::with_capacity(simp.num_faces());
        for m in 0..simp.num_faces() {
            let mut slots = vec![0u32; fset.len()];
            for (vp, a) in vol.iter().enumerate() {
                if a.get(m) == 0 {
                    let fa = a.drop_position(m);
                    slots[fset.position(&fa).unwrap()] = vp as u32;
                }
            }
            my.push(slots);
        }

        let mut neighbor: Vec<Vec<Vec<u32>>> = Vec::with_capacity(mesh.num_elements());
        for (k, quad) in mesh.elements.iter().enumerate() {
            let mut per_face = Vec::with_capacity(simp.num_faces());
            for m in 0..simp.num_faces() {
                let Some((k2, m2)) = mesh.faces[k][m].neighbor else {
                    per_face.push(Vec::new());
                    continue;
                };
                let quad2 = &mesh.elements[k2 as usize];
                let mine: Vec<u32> = simp.face_vertices(m).iter().map(|&i| quad[i]).collect();
                let theirs: Vec<u32> = simp
                    .face_vertices(m2 as usize)
                    .iter()
                    .map(|&i| quad2[i])
                    .collect();
                // Slot permutation: my face slot j holds the same global
                // vertex as neighbor slot perm[j].
                let mut perm = [0usize; 3];
                for (j, gv) in mine.iter().enumerate() {
                    let Some(j2) = theirs.iter().position(|g| g == gv) else {
                        return Err(Error::Mesh(
                            "face pairing references mismatched vertices".into(),
                        ));
                    };
                    perm[j] = j2;
                }
                let mut gather = vec![0u32; fset.len()];
                for (i, fa) in fset.iter().enumerate() {
                    let mut entries = [0u16; 3];
                    for (j, &e) in fa.entries().iter().enumerate() {
                        entries[perm[j]] = e;
                    }
                    let fb = crate::multi_index::MultiIndex::new(&entries[..fdim + 1]);
                    gather[i] = my[m2 as usize][fset.position(&fb).unwrap()];
                }
                per_face.push(gather);
            }
            neighbor.push(per_face);
        }
        Ok(Self { n, my, neighbor })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_2d_counts_and_area() {
        let mesh = Mesh::uniform(2, 1).unwrap();
        assert_eq!(mesh.num_elements(), 2);
        assert!((mesh.total_volume() - 4.0).abs() < 1e-12);
        assert!(mesh.geo.iter().all(|g| g.jacobian > 0.0));
    }

    #[test]
    fn uniform_3d_counts_and_volume() {
        let mesh = Mesh::uniform(3, 2).unwrap();
        assert_eq!(mesh.num_elements(), 48);
        assert!((mesh.total_volume() - 8.0).abs() < 1e-12);
        assert!(mesh.geo.iter().all(|g| g.jacobian > 0.0));
    }

    #[test]
    fn reference_shaped_element_has_unit_factors() {
        let simp = ReferenceSimplex::new(3);
        let vertices = simp.vertices();
        let mesh = Mesh::from_raw(3, vertices, vec![[0, 1, 2, 3]]).unwrap();
        let g = &mesh.geo[0];
        assert!((g.jacobian - 1.0).abs() < 1e-14);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g.g[i][j] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn scaled_element_jacobian() {
        let s = 0.35;
        let simp = ReferenceSimplex::new(3);
        let vertices: Vec<[f64; 3]> = simp
            .vertices()
            .iter()
            .map(|v| [v[0] * s, v[1] * s, v[2] * s])
            .collect();
        let mesh = Mesh::from_raw(3, vertices, vec![[0, 1, 2, 3]]).unwrap();
        assert!((mesh.geo[0].jacobian - s.powi(3)).abs() < 1e-13);
    }

    #[test]
    fn face_jacobians_recover_surface_area() {
        let mesh = Mesh::uniform(3, 2).unwrap();
        for (k, faces) in mesh.faces.iter().enumerate() {
            let quad = &mesh.elements[k];
            let verts: Vec<[f64; 3]> = quad.iter().map(|&v| mesh.vertices[v as usize]).collect();
            let simp = ReferenceSimplex::new(3);
            let mut direct = 0.0;
            for m in 0..4 {
                let fv: Vec<[f64; 3]> = simp.face_vertices(m).iter().map(|&i| verts[i]).collect();
                direct += face_measure(3, &fv);
            }
            let via_jf: f64 = faces.iter().map(|f| f.jf * 2.0).sum();
            assert!((direct - via_jf).abs() < 1e-12);
        }
    }

    #[test]
    fn discrete_divergence_of_normals_vanishes() {
        for dim in 2..=3 {
            let mesh = Mesh::uniform(dim, 2).unwrap();
            for faces in &mesh.faces {
                let mut total = [0.0f64; 3];
                for f in faces {
                    for c in 0..3 {
                        total[c] += f.jf * 2.0 * f.normal[c];
                    }
                }
                for c in 0..3 {
                    assert!(total[c].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn neighbor_relation_is_involutive() {
        for dim in 2..=3 {
            let mesh = Mesh::uniform(dim, 3).unwrap();
            for (k, faces) in mesh.faces.iter().enumerate() {
                for (m, f) in faces.iter().enumerate() {
                    if let Some((k2, m2)) = f.neighbor {
                        let back = mesh.faces[k2 as usize][m2 as usize].neighbor;
                        assert_eq!(back, Some((k as u32, m as u8)));
                    }
                }
            }
        }
    }

    #[test]
    fn trace_maps_consistent_for_global_linear_function() {
        for dim in 2..=3 {
            let n = 3;
            let mesh = Mesh::uniform(dim, 2).unwrap();
            let maps = TraceMaps::new(&mesh, n).unwrap();
            let vol = IndexSet::new(n, dim);
            // Bernstein coefficients of the linear function x + 2y + 3z are
            // its values at the barycentric lattice points.
            let coeffs: Vec<Vec<f64>> = (0..mesh.num_elements())
                .map(|k| {
                    vol.iter()
                        .map(|a| {
                            let lam: Vec<f64> =
                                a.entries().iter().map(|&e| e as f64 / n as f64).collect();
                            let x = mesh.map_point(k, &lam);
                            x[0] + 2.0 * x[1] + 3.0 * x[2]
                        })
                        .collect()
                })
                .collect();
            let h = mesh.h_min();
            for k in 0..mesh.num_elements() {
                for m in 0..=dim {
                    if mesh.faces[k][m].neighbor.is_none() {
                        continue;
                    }
                    for (i, &vp) in maps.my[m].iter().enumerate() {
                        let mine = coeffs[k][vp as usize];
                        let (k2, _) = mesh.faces[k][m].neighbor.unwrap();
                        let theirs = coeffs[k2 as usize][maps.neighbor[k][m][i] as usize];
                        assert!(
                            (mine - theirs).abs() < 1e-8 * h,
                            "trace mismatch d={dim} k={k} m={m}"
                        );
                    }
                }
            }
        }
    }
}

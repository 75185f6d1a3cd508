//! Bi-unit reference simplices and barycentric coordinate maps.

/// Reference simplex: the bi-unit triangle `{r,s >= -1, r+s <= 0}` (d=2) or
/// tetrahedron `{r,s,t >= -1, r+s+t <= -1}` (d=3).
#[derive(Debug, Clone, Copy)]
pub struct ReferenceSimplex {
    pub dim: usize,
}

impl ReferenceSimplex {
    pub fn new(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "only d = 2, 3 supported");
        Self { dim }
    }

    /// Measure of the reference element: 2 (triangle), 4/3 (tetrahedron).
    pub fn measure(&self) -> f64 {
        match self.dim {
            2 => 2.0,
            _ => 4.0 / 3.0,
        }
    }

    /// Vertex `i` carries barycentric coordinate `lambda_i = 1`.
    pub fn vertices(&self) -> Vec<[f64; 3]> {
        match self.dim {
            2 => vec![[-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [-1.0, 1.0, 0.0]],
            _ => vec![
                [-1.0, -1.0, -1.0],
                [1.0, -1.0, -1.0],
                [-1.0, 1.0, -1.0],
                [-1.0, -1.0, 1.0],
            ],
        }
    }

    /// Barycentric coordinates of a reference point.
    pub fn barycentric(&self, x: &[f64]) -> [f64; 4] {
        match self.dim {
            2 => {
                let (r, s) = (x[0], x[1]);
                [-(r + s) / 2.0, (1.0 + r) / 2.0, (1.0 + s) / 2.0, 0.0]
            }
            _ => {
                let (r, s, t) = (x[0], x[1], x[2]);
                [
                    -(1.0 + r + s + t) / 2.0,
                    (1.0 + r) / 2.0,
                    (1.0 + s) / 2.0,
                    (1.0 + t) / 2.0,
                ]
            }
        }
    }

    /// Cartesian reference coordinates from barycentric ones.
    pub fn from_barycentric(&self, lam: &[f64]) -> [f64; 3] {
        let verts = self.vertices();
        let mut x = [0.0; 3];
        for (l, v) in lam.iter().zip(verts.iter()) {
            for k in 0..3 {
                x[k] += l * v[k];
            }
        }
        x
    }

    /// Gradient of `lambda_i` with respect to the reference coordinates.
    pub fn barycentric_gradient(&self, i: usize) -> [f64; 3] {
        match self.dim {
            2 => match i {
                0 => [-0.5, -0.5, 0.0],
                1 => [0.5, 0.0, 0.0],
                _ => [0.0, 0.5, 0.0],
            },
            _ => match i {
                0 => [-0.5, -0.5, -0.5],
                1 => [0.5, 0.0, 0.0],
                2 => [0.0, 0.5, 0.0],
                _ => [0.0, 0.0, 0.5],
            },
        }
    }

    pub fn num_faces(&self) -> usize {
        self.dim + 1
    }

    /// Vertex positions (local) of face `m`, i.e. all vertices except `m`,
    /// in increasing order. This fixes the face's own barycentric ordering.
    pub fn face_vertices(&self, m: usize) -> Vec<usize> {
        (0..=self.dim).filter(|&i| i != m).collect()
    }

    /// Measure of the bi-unit face simplex used to parametrize every face:
    /// interval of length 2 (d=2) or triangle of area 2 (d=3).
    pub fn face_parameter_measure(&self) -> f64 {
        2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barycentric_at_vertices() {
        for d in 2..=3 {
            let simp = ReferenceSimplex::new(d);
            for (j, v) in simp.vertices().iter().enumerate() {
                let lam = simp.barycentric(&v[..d]);
                for i in 0..=d {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((lam[i] - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn barycentric_partition_and_roundtrip() {
        let simp = ReferenceSimplex::new(3);
        let x = [-0.3, -0.5, -0.4];
        let lam = simp.barycentric(&x);
        assert!((lam.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let back = simp.from_barycentric(&lam);
        for k in 0..3 {
            assert!((back[k] - x[k]).abs() < 1e-14);
        }
    }
}

//! Density spaces on triangulated surfaces.
//!
//! Local basis functions are quadratics in the reference coordinates
//! `(xi, eta) = (lambda_1, lambda_2)`, stored as coefficients of
//! `[1, xi, eta, xi^2, xi*eta, eta^2]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::mesh::TriangleMesh;

pub type LocalPoly = [f64; 6];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// Piecewise constant, discontinuous.
    P0,
    /// Piecewise linear, discontinuous.
    P1Disc,
    /// Piecewise quadratic, continuous (vertex and edge-midpoint dofs).
    P2,
}

impl Space {
    pub fn degree(self) -> usize {
        match self {
            Space::P0 => 0,
            Space::P1Disc => 1,
            Space::P2 => 2,
        }
    }

    pub fn local_count(self) -> usize {
        match self {
            Space::P0 => 1,
            Space::P1Disc => 3,
            Space::P2 => 6,
        }
    }

    pub fn local_basis(self) -> &'static [LocalPoly] {
        match self {
            Space::P0 => &P0_BASIS,
            Space::P1Disc => &P1_BASIS,
            Space::P2 => &P2_BASIS,
        }
    }
}

const P0_BASIS: [LocalPoly; 1] = [[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]];

const P1_BASIS: [LocalPoly; 3] = [
    [1.0, -1.0, -1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
];

/// Vertex functions `l_i (2 l_i - 1)`, then edge functions `4 l_i l_j`
/// for local edges (0,1), (1,2), (2,0).
const P2_BASIS: [LocalPoly; 6] = [
    [1.0, -3.0, -3.0, 2.0, 4.0, 2.0],
    [0.0, -1.0, 0.0, 2.0, 0.0, 0.0],
    [0.0, 0.0, -1.0, 0.0, 0.0, 2.0],
    [0.0, 4.0, 0.0, -4.0, -4.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 4.0, 0.0],
    [0.0, 0.0, 4.0, 0.0, -4.0, -4.0],
];

#[inline]
pub fn eval_poly(c: &LocalPoly, xi: f64, eta: f64) -> f64 {
    c[0] + c[1] * xi + c[2] * eta + c[3] * xi * xi + c[4] * xi * eta + c[5] * eta * eta
}

/// Local-to-global dof maps.
#[derive(Debug, Clone, PartialEq)]
pub struct DofLayout {
    pub space: Space,
    pub dof_count: usize,
    /// Per triangle; only the first `space.local_count()` entries are used.
    pub local: Vec<[usize; 6]>,
}

impl DofLayout {
    pub fn new(mesh: &TriangleMesh, space: Space) -> Self {
        let nt = mesh.triangles.len();
        let mut local = vec![[0usize; 6]; nt];
        let dof_count = match space {
            Space::P0 => {
                for (t, l) in local.iter_mut().enumerate() {
                    l[0] = t;
                }
                nt
            }
            Space::P1Disc => {
                for (t, l) in local.iter_mut().enumerate() {
                    for k in 0..3 {
                        l[k] = 3 * t + k;
                    }
                }
                3 * nt
            }
            Space::P2 => {
                let nv = mesh.vertices.len();
                for (t, l) in local.iter_mut().enumerate() {
                    for k in 0..3 {
                        l[k] = mesh.triangles[t][k];
                        l[3 + k] = nv + mesh.triangle_edges[t][k];
                    }
                }
                nv + mesh.edges.len()
            }
        };
        DofLayout { space, dof_count, local }
    }

    pub fn local_count(&self) -> usize {
        self.space.local_count()
    }

    pub fn dofs(&self, t: usize) -> &[usize] {
        &self.local[t][..self.space.local_count()]
    }

    /// Number of dofs if every triangle carried its own quadratic.
    pub fn discontinuous_p2_count(&self) -> usize {
        6 * self.local.len()
    }

    /// Coefficients interpolating `f` at the nodes of the space.
    ///
    /// `f(t, xi, eta)` is queried at vertex, edge-midpoint or centroid nodes.
    pub fn interpolate(&self, mut f: impl FnMut(usize, f64, f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dof_count];
        const NODES: [(f64, f64); 6] = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.5, 0.0), (0.5, 0.5), (0.0, 0.5)];
        for t in 0..self.local.len() {
            match self.space {
                Space::P0 => out[self.local[t][0]] = f(t, 1.0 / 3.0, 1.0 / 3.0),
                Space::P1Disc => {
                    for k in 0..3 {
                        out[self.local[t][k]] = f(t, NODES[k].0, NODES[k].1);
                    }
                }
                Space::P2 => {
                    for k in 0..6 {
                        out[self.local[t][k]] = f(t, NODES[k].0, NODES[k].1);
                    }
                }
            }
        }
        out
    }

    /// Value of a coefficient vector at reference point `(xi, eta)` of triangle `t`.
    pub fn evaluate(&self, coeffs: &[f64], t: usize, xi: f64, eta: f64) -> f64 {
        self.space
            .local_basis()
            .iter()
            .zip(self.dofs(t))
            .map(|(b, &d)| coeffs[d] * eval_poly(b, xi, eta))
            .sum()
    }
}

/// Continuous P2 layout.
pub fn p2_dof_layout(mesh: &TriangleMesh) -> DofLayout {
    DofLayout::new(mesh, Space::P2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cube_surface, build_icosphere};

    #[test]
    fn dof_counts() {
        assert_eq!(p2_dof_layout(&build_icosphere(0).unwrap()).dof_count, 42);
        assert_eq!(p2_dof_layout(&build_icosphere(2).unwrap()).dof_count, 642);
        assert_eq!(p2_dof_layout(&build_cube_surface(0).unwrap()).dof_count, 26);
        let m = build_icosphere(1).unwrap();
        assert_eq!(DofLayout::new(&m, Space::P0).dof_count, 80);
        assert_eq!(DofLayout::new(&m, Space::P1Disc).dof_count, 240);
    }

    #[test]
    fn shared_edge_dofs() {
        let m = build_icosphere(1).unwrap();
        let l = p2_dof_layout(&m);
        for (e, edge) in m.edges.iter().enumerate() {
            let [t0, t1] = edge.triangles;
            let d = m.vertices.len() + e;
            assert!(l.dofs(t0).contains(&d) && l.dofs(t1).contains(&d));
        }
    }

    #[test]
    fn nodal_basis() {
        const NODES: [(f64, f64); 6] = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.5, 0.0), (0.5, 0.5), (0.0, 0.5)];
        for (i, b) in P2_BASIS.iter().enumerate() {
            for (j, n) in NODES.iter().enumerate() {
                let v = eval_poly(b, n.0, n.1);
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        for (xi, eta) in [(0.2, 0.3), (0.7, 0.1)] {
            let s: f64 = P2_BASIS.iter().map(|b| eval_poly(b, xi, eta)).sum();
            assert!((s - 1.0).abs() < 1e-14);
            let s: f64 = P1_BASIS.iter().map(|b| eval_poly(b, xi, eta)).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }
}

//! Closed triangulated surfaces with fixed connectivity.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;
use crate::{Error, Result, Vec3};

pub const MAX_ICOSPHERE_LEVEL: usize = 6;
pub const MAX_CUBE_LEVEL: usize = 7;

/// Relative area guard, multiplied by the mean initial facet area.
pub const AREA_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    /// Vertex indices, `v[0] < v[1]`.
    pub v: [usize; 2],
    /// The two adjacent triangles.
    pub triangles: [usize; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// Local edge `k` of triangle `t` joins local vertices `k` and `k + 1 mod 3`.
    pub triangle_edges: Vec<[usize; 3]>,
    pub refinement_level: usize,
}

impl TriangleMesh {
    /// Builds edge tables and checks that the surface is a closed 2-manifold.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>, refinement_level: usize) -> Result<Self> {
        let mut map: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut triangle_edges = vec![[0usize; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if a >= vertices.len() || b >= vertices.len() || a == b {
                    return Err(Error::InvalidArgument(alloc::format!("bad triangle {t}")));
                }
                let key = (a.min(b), a.max(b));
                let e = *map.entry(key).or_insert_with(|| {
                    edges.push(Edge { v: [key.0, key.1], triangles: [usize::MAX; 2] });
                    edges.len() - 1
                });
                let slot = &mut edges[e].triangles;
                if slot[0] == usize::MAX {
                    slot[0] = t;
                } else if slot[1] == usize::MAX {
                    slot[1] = t;
                } else {
                    return Err(Error::InvalidArgument(alloc::format!("edge {key:?} has more than two triangles")));
                }
                triangle_edges[t][k] = e;
            }
        }
        if let Some(e) = edges.iter().find(|e| e.triangles[1] == usize::MAX) {
            return Err(Error::InvalidArgument(alloc::format!("open edge {:?}", e.v)));
        }
        let mesh = TriangleMesh { vertices, triangles, edges, triangle_edges, refinement_level };
        if mesh.euler_characteristic() != 2 {
            return Err(Error::InvalidArgument(alloc::format!(
                "Euler characteristic {} != 2",
                mesh.euler_characteristic()
            )));
        }
        Ok(mesh)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    pub fn triangle_points(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Triangles incident to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }

    /// Flips triangles whose normal points toward the body center.
    fn orient_outward(&mut self) {
        let center = self.vertices.iter().fold(Vec3::zeros(), |s, v| s + v) / self.vertices.len() as f64;
        for tri in &mut self.triangles {
            let [a, b, c] = [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]];
            let n = (b - a).cross(&(c - a));
            let centroid = (a + b + c) / 3.0;
            if n.dot(&(centroid - center)) < 0.0 {
                tri.swap(1, 2);
            }
        }
    }
}

/// Regular icosahedron refined `level` times with vertices projected to the unit sphere.
pub fn build_icosphere(level: usize) -> Result<TriangleMesh> {
    if level > MAX_ICOSPHERE_LEVEL {
        return Err(Error::LevelTooLarge { level, max: MAX_ICOSPHERE_LEVEL });
    }
    let p = (1.0 + sqrt(5.0)) / 2.0;
    let raw = [
        [-1.0, p, 0.0],
        [1.0, p, 0.0],
        [-1.0, -p, 0.0],
        [1.0, -p, 0.0],
        [0.0, -1.0, p],
        [0.0, 1.0, p],
        [0.0, -1.0, -p],
        [0.0, 1.0, -p],
        [p, 0.0, -1.0],
        [p, 0.0, 1.0],
        [-p, 0.0, -1.0],
        [-p, 0.0, 1.0],
    ];
    let mut vertices: Vec<Vec3> = raw.iter().map(|r| Vec3::new(r[0], r[1], r[2]).normalize()).collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for &[a, b, c] in &triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        triangles = next;
    }
    let mut mesh = TriangleMesh::new(vertices, triangles, level)?;
    mesh.orient_outward();
    Ok(mesh)
}

/// Boundary of `[-1, 1]^3` with `2 * 4^level` triangles per face.
///
/// Each square cell is split along the diagonal joining its first and third
/// corners in face-local order, which keeps `(1, 1/3, 1/3)` off every edge.
pub fn build_cube_surface(level: usize) -> Result<TriangleMesh> {
    if level > MAX_CUBE_LEVEL {
        return Err(Error::LevelTooLarge { level, max: MAX_CUBE_LEVEL });
    }
    let n = 1usize << level;
    let mut index: BTreeMap<[usize; 3], usize> = BTreeMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut vid = |c: [usize; 3], vertices: &mut Vec<Vec3>| -> usize {
        *index.entry(c).or_insert_with(|| {
            let f = |i: usize| -1.0 + 2.0 * i as f64 / n as f64;
            vertices.push(Vec3::new(f(c[0]), f(c[1]), f(c[2])));
            vertices.len() - 1
        })
    };
    for axis in 0..3 {
        for side in [0usize, n] {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            for i in 0..n {
                for j in 0..n {
                    let corner = |di: usize, dj: usize| {
                        let mut c = [0usize; 3];
                        c[axis] = side;
                        c[u] = i + di;
                        c[v] = j + dj;
                        c
                    };
                    let q = [
                        vid(corner(0, 0), &mut vertices),
                        vid(corner(1, 0), &mut vertices),
                        vid(corner(1, 1), &mut vertices),
                        vid(corner(0, 1), &mut vertices),
                    ];
                    // (u, v) = (y, z) on the x faces; the diagonal runs from (i+1, j) to (i, j+1).
                    triangles.push([q[0], q[1], q[3]]);
                    triangles.push([q[1], q[2], q[3]]);
                }
            }
        }
    }
    let mut mesh = TriangleMesh::new(vertices, triangles, level)?;
    mesh.orient_outward();
    Ok(mesh)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleFrame {
    pub normal: Vec3,
    pub centroid: Vec3,
    pub area: f64,
    pub t1: Vec3,
    pub t2: Vec3,
}

impl TriangleFrame {
    pub fn from_points(p: &[Vec3; 3], index: usize) -> Result<Self> {
        let cross = (p[1] - p[0]).cross(&(p[2] - p[0]));
        let twice = cross.norm();
        let scale = (p[1] - p[0]).norm_squared().max((p[2] - p[0]).norm_squared());
        if !(twice > 1e-14 * scale) || !twice.is_finite() {
            return Err(Error::DegenerateTriangle(index));
        }
        let normal = cross / twice;
        let t1 = (p[1] - p[0]).normalize();
        let t2 = normal.cross(&t1);
        Ok(TriangleFrame { normal, centroid: (p[0] + p[1] + p[2]) / 3.0, area: 0.5 * twice, t1, t2 })
    }
}

/// Current images of the reference vertices over a shared connectivity.
#[derive(Debug, Clone)]
pub struct SurfaceMap {
    pub base: Arc<TriangleMesh>,
    pub positions: Vec<Vec3>,
    /// Minimal admissible facet area.
    pub area_guard: f64,
}

impl SurfaceMap {
    pub fn new(base: TriangleMesh) -> Result<Self> {
        Self::from_shared(Arc::new(base))
    }

    pub fn from_shared(base: Arc<TriangleMesh>) -> Result<Self> {
        let positions = base.vertices.clone();
        let mut total = 0.0;
        for t in 0..base.triangles.len() {
            total += TriangleFrame::from_points(&base.triangle_points(t), t)?.area;
        }
        let area_guard = AREA_GUARD * total / base.triangles.len() as f64;
        Ok(SurfaceMap { base, positions, area_guard })
    }

    /// Same connectivity and guard with new vertex positions.
    pub fn with_positions(&self, positions: Vec<Vec3>) -> Result<Self> {
        if positions.len() != self.positions.len() {
            return Err(Error::SizeMismatch { expected: self.positions.len(), got: positions.len() });
        }
        let map = SurfaceMap { base: self.base.clone(), positions, area_guard: self.area_guard };
        map.check_areas()?;
        Ok(map)
    }

    pub fn check_areas(&self) -> Result<()> {
        for t in 0..self.triangle_count() {
            let p = self.triangle_points(t);
            let area = 0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
            if !(area >= self.area_guard) {
                return Err(Error::DegenerateSurface { triangle: t, area, guard: self.area_guard });
            }
        }
        Ok(())
    }

    pub fn triangle_count(&self) -> usize {
        self.base.triangles.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.base.triangles[t];
        [self.positions[a], self.positions[b], self.positions[c]]
    }

    pub fn frame(&self, t: usize) -> Result<TriangleFrame> {
        TriangleFrame::from_points(&self.triangle_points(t), t)
    }

    pub fn frames(&self) -> Result<Vec<TriangleFrame>> {
        (0..self.triangle_count()).map(|t| self.frame(t)).collect()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangle_count())
            .map(|t| {
                let p = self.triangle_points(t);
                0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm()
            })
            .sum()
    }

    /// Area-weighted vertex normals.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut n = vec![Vec3::zeros(); self.vertex_count()];
        for (t, tri) in self.base.triangles.iter().enumerate() {
            let p = self.triangle_points(t);
            let c = (p[1] - p[0]).cross(&(p[2] - p[0]));
            for &v in tri {
                n[v] += c;
            }
        }
        for v in &mut n {
            let len = v.norm();
            if len > 0.0 {
                *v /= len;
            }
        }
        n
    }

    /// Maps reference barycentric coordinates `(xi, eta)` on triangle `t`.
    pub fn point(&self, t: usize, xi: f64, eta: f64) -> Vec3 {
        let p = self.triangle_points(t);
        p[0] + (p[1] - p[0]) * xi + (p[2] - p[0]) * eta
    }
}

/// Facet normal of `map` at triangle `t`; convenience for callers.
pub fn triangle_frame(map: &SurfaceMap, t: usize) -> Result<TriangleFrame> {
    map.frame(t)
}

/// `positions + step * increment`, with the area guard re-checked.
pub fn update_vertices(map: &SurfaceMap, increment: &[Vec3], step: f64) -> Result<SurfaceMap> {
    if increment.len() != map.vertex_count() {
        return Err(Error::SizeMismatch { expected: map.vertex_count(), got: increment.len() });
    }
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("step {step} must be positive")));
    }
    let positions = map.positions.iter().zip(increment).map(|(p, d)| p + d * step).collect();
    map.with_positions(positions)
}

/// Mean vertex radius and `(1/V) * sqrt(sum (|p_i| - r)^2)`.
pub fn radius_error(map: &SurfaceMap, target: f64) -> (f64, f64) {
    let v = map.vertex_count() as f64;
    let mean = map.positions.iter().map(|p| p.norm()).sum::<f64>() / v;
    let sq = map.positions.iter().map(|p| (p.norm() - target).powi(2)).sum::<f64>();
    (mean, sqrt(sq) / v)
}

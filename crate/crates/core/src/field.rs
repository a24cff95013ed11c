//! Potential and gravity of a single layer density, finite-difference
//! Hessians and the per-vertex gravity frame.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::SMatrix;

use crate::assembly::map_indices;
use crate::kernels::{Panel, Side, FAR_FIELD_ORDER};
use crate::math::PI;
use crate::mesh::{SurfaceMap, TriangleFrame};
use crate::quadrature::{regular_rule, QuadratureRule};
use crate::solvers::SaddleSolution;
use crate::space::{DofLayout, LocalPoly};
use crate::{Error, Mat3, Result, Vec3};

/// Lower bound for `|det(grad g)|` at every vertex.
pub const MARUSSI_EPS: f64 = 1e-8;

/// Where an evaluation point sits relative to the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSide {
    /// Strictly outside the body.
    OffSurface,
    /// On a facet; the gradient is the exterior limit.
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldValue {
    pub u: f64,
    pub g: Vec3,
}

/// `V mu` for a density given per facet as a polynomial in the reference monomials.
#[derive(Debug, Clone)]
pub struct DensityField {
    panels: Vec<Panel>,
    polys: Vec<LocalPoly>,
    far: QuadratureRule,
}

impl DensityField {
    /// Density with coefficients `coeffs` in `layout`.
    pub fn new(map: &SurfaceMap, layout: &DofLayout, coeffs: &[f64]) -> Result<Self> {
        if coeffs.len() != layout.dof_count {
            return Err(Error::SizeMismatch { expected: layout.dof_count, got: coeffs.len() });
        }
        let basis = layout.space.local_basis();
        let mut panels = Vec::with_capacity(map.triangle_count());
        let mut polys = Vec::with_capacity(map.triangle_count());
        for t in 0..map.triangle_count() {
            panels.push(Panel::new(map.triangle_points(t)).map_err(|_| Error::DegenerateTriangle(t))?);
            let mut c = [0.0; 6];
            for (b, &d) in basis.iter().zip(layout.dofs(t)) {
                for k in 0..6 {
                    c[k] += coeffs[d] * b[k];
                }
            }
            polys.push(c);
        }
        Ok(DensityField { panels, polys, far: regular_rule(FAR_FIELD_ORDER)? })
    }

    /// Single layer potential of the solved density `mu`; the side terms
    /// `a_j` stay on the data side.
    pub fn from_solution(map: &SurfaceMap, layout: &DofLayout, solution: &SaddleSolution) -> Result<Self> {
        Self::new(map, layout, solution.mu.as_slice())
    }

    pub fn panel_count(&self) -> usize {
        self.panels.len()
    }

    /// Sum of signed solid angles; `-4 pi` inside the body and `0` outside.
    pub fn solid_angle(&self, x: &Vec3) -> f64 {
        self.panels.iter().map(|p| p.solid_angle(x)).sum()
    }

    /// Potential and gradient at `x`.
    pub fn eval(&self, x: &Vec3, side: EvalSide) -> Result<FieldValue> {
        if side == EvalSide::OffSurface && self.solid_angle(x) < -2.0 * PI {
            return Err(Error::InsideBody);
        }
        self.eval_unchecked(x, side)
    }

    /// As [`Self::eval`] without the inside test.
    pub fn eval_unchecked(&self, x: &Vec3, side: EvalSide) -> Result<FieldValue> {
        let s = match side {
            EvalSide::OffSurface => Side::OffSurface,
            EvalSide::Exterior => Side::ExteriorTrace,
        };
        let mut u = 0.0;
        let mut g = Vec3::zeros();
        for (p, c) in self.panels.iter().zip(&self.polys) {
            let m = p.integrals(x, s, true, &self.far)?;
            u += m.value_of(c);
            g += m.gradient_of(c);
        }
        Ok(FieldValue { u, g })
    }

    /// Potential only (cheaper).
    pub fn potential(&self, x: &Vec3, side: EvalSide) -> Result<f64> {
        let s = match side {
            EvalSide::OffSurface => Side::OffSurface,
            EvalSide::Exterior => Side::ExteriorTrace,
        };
        let mut u = 0.0;
        for (p, c) in self.panels.iter().zip(&self.polys) {
            u += p.integrals(x, s, false, &self.far)?.value_of(c);
        }
        Ok(u)
    }

    /// Potentials at the points `rule` places on every facet of `map`, facet-major.
    pub fn surface_values(&self, map: &SurfaceMap, rule: &QuadratureRule) -> Result<Vec<f64>> {
        let per = map_indices(map.triangle_count(), |t| {
            rule.points
                .iter()
                .map(|pt| self.potential(&map.point(t, pt[0], pt[1]), EvalSide::Exterior))
                .collect::<Result<Vec<_>>>()
        });
        let mut out = Vec::with_capacity(map.triangle_count() * rule.len());
        for v in per {
            out.extend(v?);
        }
        Ok(out)
    }
}

/// Multi-density evaluation: `sum_k field_k(x)`.
pub fn eval_field(fields: &[&DensityField], x: &Vec3, side: EvalSide) -> Result<FieldValue> {
    let mut out = FieldValue { u: 0.0, g: Vec3::zeros() };
    for (k, f) in fields.iter().enumerate() {
        let v = if k == 0 { f.eval(x, side)? } else { f.eval_unchecked(x, side)? };
        out.u += v.u;
        out.g += v.g;
    }
    Ok(out)
}

/// Finite-difference steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub delta_normal: f64,
    pub delta_tangential: f64,
    /// Height of the vertex sample points above the surface, in units of
    /// the mean incident edge length.
    pub lift_factor: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig { delta_normal: 1e-4, delta_tangential: 1e-5, lift_factor: 1.0 }
    }
}

impl FdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_normal > 0.0 && self.delta_tangential > 0.0) {
            return Err(Error::InvalidArgument("finite-difference steps must be positive".into()));
        }
        if !(self.lift_factor > 0.0 && self.lift_factor.is_finite()) {
            return Err(Error::InvalidArgument("lift factor must be positive".into()));
        }
        Ok(())
    }
}

/// Symmetrized FD Hessian and the asymmetry of the raw stencil result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdHessian {
    pub hessian: Mat3,
    /// `|H - H^T|_F / |H|_F` before symmetrization.
    pub asymmetry: f64,
}

/// Hessian from gradients: one-sided second-order stencil along the normal,
/// central differences along `t1`, `t2`.
pub fn fd_hessian(
    mut gradient: impl FnMut(&Vec3) -> Result<Vec3>,
    x: &Vec3,
    frame: &TriangleFrame,
    config: &FdConfig,
) -> Result<FdHessian> {
    config.validate()?;
    let (dn, dt) = (config.delta_normal, config.delta_tangential);
    let n = frame.normal;
    let g0 = gradient(x)?;
    let g1 = gradient(&(x + n * dn))?;
    let g2 = gradient(&(x + n * (2.0 * dn)))?;
    let d_n = (g1 * 4.0 - g0 * 3.0 - g2) / (2.0 * dn);
    let mut cols = [d_n, Vec3::zeros(), Vec3::zeros()];
    for (k, t) in [frame.t1, frame.t2].iter().enumerate() {
        let gp = gradient(&(x + t * dt))?;
        let gm = gradient(&(x - t * dt))?;
        let diff = gp - gm;
        let noise = 10.0 * f64::EPSILON * g0.norm().max(f64::MIN_POSITIVE);
        if diff.norm() < 10.0 * noise {
            log::warn!("tangential difference {:e} is at the evaluation noise level; step {dt:e} too small", diff.norm());
        }
        cols[k + 1] = diff / (2.0 * dt);
    }
    // H e = d_e for the orthonormal frame (n, t1, t2).
    let raw = cols[0] * n.transpose() + cols[1] * frame.t1.transpose() + cols[2] * frame.t2.transpose();
    let sym = (raw + raw.transpose()) * 0.5;
    let scale = sym.norm();
    let asymmetry = if scale > 0.0 { (raw - raw.transpose()).norm() / scale } else { 0.0 };
    Ok(FdHessian { hessian: sym, asymmetry })
}

/// Frobenius norm of the difference.
pub fn hessian_error<const R: usize, const C: usize>(approx: &SMatrix<f64, R, C>, exact: &SMatrix<f64, R, C>) -> f64 {
    (approx - exact).norm()
}

/// `u = 1/|x|`, its gradient and Hessian.
pub fn point_mass(x: &Vec3) -> (f64, Vec3, Mat3) {
    let r = x.norm();
    let r3 = r * r * r;
    let h = x * x.transpose() * (3.0 / (r3 * r * r)) - Mat3::identity() / r3;
    (1.0 / r, -x / r3, h)
}

/// Gravity and gravity gradient at the vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct GravityFrame {
    /// Potential at the vertices.
    pub u: Vec<f64>,
    pub g: Vec<Vec3>,
    pub grad_g: Vec<Mat3>,
    pub det: Vec<f64>,
    /// Largest raw FD asymmetry over the vertices.
    pub max_asymmetry: f64,
}

impl GravityFrame {
    /// `-(grad g)^-1 g` per vertex.
    pub fn oblique_directions(&self) -> Result<Vec<Vec3>> {
        self.g
            .iter()
            .zip(&self.grad_g)
            .enumerate()
            .map(|(v, (g, h))| h.try_inverse().map(|inv| -(inv * g)).ok_or(Error::Marussi { iteration: 0, vertex: v, det: 0.0 }))
            .collect()
    }

    /// `(grad g)^-1 rhs_v` per vertex.
    pub fn solve(&self, rhs: &[Vec3]) -> Result<Vec<Vec3>> {
        if rhs.len() != self.g.len() {
            return Err(Error::SizeMismatch { expected: self.g.len(), got: rhs.len() });
        }
        rhs.iter()
            .zip(&self.grad_g)
            .enumerate()
            .map(|(v, (r, h))| h.lu().solve(r).ok_or(Error::Marussi { iteration: 0, vertex: v, det: 0.0 }))
            .collect()
    }
}

/// Area-weighted centroid of the surface.
pub fn surface_center(map: &SurfaceMap) -> Result<Vec3> {
    let mut c = Vec3::zeros();
    let mut w = 0.0;
    for f in map.frames()? {
        c += f.centroid * f.area;
        w += f.area;
    }
    Ok(c / w)
}

/// Vertex normal frame: area-weighted normal and an orthonormal tangent pair.
pub fn vertex_frames(map: &SurfaceMap) -> Result<Vec<TriangleFrame>> {
    let normals = map.vertex_normals();
    let vt = map.base.vertex_triangles();
    let mut out = Vec::with_capacity(normals.len());
    for (v, n) in normals.iter().enumerate() {
        let f = map.frame(vt[v][0])?;
        let t1 = (f.t1 - n * n.dot(&f.t1)).normalize();
        let t2 = n.cross(&t1);
        out.push(TriangleFrame { normal: *n, centroid: map.positions[v], area: 0.0, t1, t2 });
    }
    Ok(out)
}

/// Mean length of the edges meeting at each vertex.
pub fn vertex_edge_lengths(map: &SurfaceMap) -> Vec<f64> {
    let nv = map.vertex_count();
    let mut sum = vec![0.0; nv];
    let mut count = vec![0.0; nv];
    for tri in &map.base.triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let l = (map.positions[a] - map.positions[b]).norm();
            sum[a] += l;
            sum[b] += l;
            count[a] += 1.0;
            count[b] += 1.0;
        }
    }
    sum.iter().zip(&count).map(|(s, c)| s / c).collect()
}

/// Potential, gradient and (optionally) FD Hessian at a vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexSample {
    pub u: f64,
    pub g: Vec3,
    pub hessian: FdHessian,
}

/// Potential, gradient and FD Hessian per vertex.
///
/// Close to a faceted surface the discrete field carries the edge and
/// vertex singularities of the polyhedron, so samples are taken at
/// `x_v + l n_v` with `l = lift_factor * mean edge length` and carried back
/// with the monopole scaling `u ~ rho^-1`, `g ~ rho^-2`, `H ~ rho^-3`, `rho`
/// the distance to the surface center. With `hessian = false` the Hessian
/// is left zero.
pub fn vertex_samples(fields: &[&DensityField], map: &SurfaceMap, config: &FdConfig, hessian: bool) -> Result<Vec<VertexSample>> {
    config.validate()?;
    let frames = vertex_frames(map)?;
    let lengths = vertex_edge_lengths(map);
    let center = surface_center(map)?;
    let out = map_indices(map.vertex_count(), |v| {
        let f = &frames[v];
        let x0 = map.positions[v];
        let rho0 = (x0 - center).norm();
        if !(rho0 > 0.0) {
            return Err(Error::OriginOnSurface);
        }
        let x = x0 + f.normal * (config.lift_factor * lengths[v]);
        let s = (x - center).norm() / rho0;
        let value = eval_field(fields, &x, EvalSide::OffSurface)?;
        let mut h = FdHessian { hessian: Mat3::zeros(), asymmetry: 0.0 };
        if hessian {
            h = fd_hessian(|p| Ok(eval_field(fields, p, EvalSide::OffSurface)?.g), &x, f, config)?;
            h.hessian *= s * s * s;
        }
        Ok(VertexSample { u: value.u * s, g: value.g * (s * s), hessian: h })
    });
    out.into_iter().collect()
}

/// Gravity frame of the exterior potential, with the Marussi check.
pub fn gravity_frame(fields: &[&DensityField], map: &SurfaceMap, config: &FdConfig) -> Result<GravityFrame> {
    let samples = vertex_samples(fields, map, config, true)?;
    let max_asymmetry = samples.iter().map(|s| s.hessian.asymmetry).fold(0.0, f64::max);
    let u: Vec<f64> = samples.iter().map(|s| s.u).collect();
    let g: Vec<Vec3> = samples.iter().map(|s| s.g).collect();
    let grad_g: Vec<Mat3> = samples.iter().map(|s| s.hessian.hessian).collect();
    let det: Vec<f64> = grad_g.iter().map(|h| h.determinant()).collect();
    for (v, d) in det.iter().enumerate() {
        if !(d.abs() > MARUSSI_EPS) {
            return Err(Error::Marussi { iteration: 0, vertex: v, det: *d });
        }
    }
    Ok(GravityFrame { u, g, grad_g, det, max_asymmetry })
}

/// Gradients at the vertices (same sampling as [`gravity_frame`], no Marussi check).
pub fn vertex_gradients(fields: &[&DensityField], map: &SurfaceMap, config: &FdConfig) -> Result<Vec<Vec3>> {
    Ok(vertex_samples(fields, map, config, false)?.into_iter().map(|s| s.g).collect())
}

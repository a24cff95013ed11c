//! Single layer panel integrals over flat triangles.
//!
//! For a point `x` and a triangle `T` with polynomial density `b`, computes
//! `-1/(4 pi) * int_T b(y) / |x - y| ds_y` and its gradient in `x`, in closed
//! form. Coordinates are taken in the panel plane with origin at the
//! projection `x0` of `x`; `z` is the signed height of `x` above the plane.
//! Surface moments `int_T s^a r^k` are reduced to edge integrals by the
//! divergence theorem, plus the solid angle for the `r^-3` family.

use crate::math::{asinh, atan2, ln, sqrt, FOUR_PI};
use crate::quadrature::QuadratureRule;
use crate::space::{eval_poly, LocalPoly};
use crate::{Error, Result, Vec3};

/// How to treat points lying in the panel plane inside the panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Limit from the side the normal points to.
    ExteriorTrace,
    /// Limit from the opposite side.
    InteriorTrace,
    /// Average of both limits (drops the normal jump).
    PrincipalValue,
    /// Point must not lie on the panel.
    OffSurface,
}

/// Relative tolerance for "in the plane" and "on an edge" decisions.
const GEOM_TOL: f64 = 1e-12;

/// Beyond this distance-to-diameter ratio, quadrature replaces the closed form.
pub const FAR_FIELD_RATIO: f64 = 6.0;

/// Degree of the Gauss rule used beyond [`FAR_FIELD_RATIO`].
pub const FAR_FIELD_ORDER: usize = 8;

/// Precomputed geometry of a flat triangle.
#[derive(Debug, Clone, Copy)]
pub struct Panel {
    pub p: [Vec3; 3],
    pub normal: Vec3,
    pub t1: Vec3,
    pub t2: Vec3,
    pub area: f64,
    pub diam: f64,
    pub centroid: Vec3,
    /// Edge unit directions in `(t1, t2)` coordinates; edge `k` runs from vertex `k` to `k+1`.
    tau: [[f64; 2]; 3],
    /// Outward in-plane edge normals.
    nu: [[f64; 2]; 3],
    /// In-plane gradients of the reference coordinates `xi`, `eta`.
    g_xi: [f64; 2],
    g_eta: [f64; 2],
    far_ratio: f64,
}

/// Integrals of the six reference monomials `[1, xi, eta, xi^2, xi*eta, eta^2]`,
/// including the `-1/(4 pi)` factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonomialIntegrals {
    pub value: [f64; 6],
    pub gradient: [Vec3; 6],
}

impl MonomialIntegrals {
    pub fn zero() -> Self {
        MonomialIntegrals { value: [0.0; 6], gradient: [Vec3::zeros(); 6] }
    }

    #[inline]
    pub fn value_of(&self, c: &LocalPoly) -> f64 {
        (0..6).map(|k| c[k] * self.value[k]).sum()
    }

    #[inline]
    pub fn gradient_of(&self, c: &LocalPoly) -> Vec3 {
        let mut g = Vec3::zeros();
        for k in 0..6 {
            g += self.gradient[k] * c[k];
        }
        g
    }
}

impl Panel {
    pub fn new(p: [Vec3; 3]) -> Result<Self> {
        let e1 = p[1] - p[0];
        let e2 = p[2] - p[0];
        let cross = e1.cross(&e2);
        let twice = cross.norm();
        let diam = e1.norm().max(e2.norm()).max((p[2] - p[1]).norm());
        if !(twice > 1e-14 * diam * diam) || !twice.is_finite() {
            return Err(Error::DegenerateTriangle(0));
        }
        let normal = cross / twice;
        let t1 = e1 / e1.norm();
        let t2 = normal.cross(&t1);
        let q = [[0.0, 0.0], [e1.dot(&t1), e1.dot(&t2)], [e2.dot(&t1), e2.dot(&t2)]];
        let mut tau = [[0.0; 2]; 3];
        let mut nu = [[0.0; 2]; 3];
        for k in 0..3 {
            let a = q[k];
            let b = q[(k + 1) % 3];
            let d = [b[0] - a[0], b[1] - a[1]];
            let l = sqrt(d[0] * d[0] + d[1] * d[1]);
            tau[k] = [d[0] / l, d[1] / l];
            nu[k] = [tau[k][1], -tau[k][0]];
        }
        // J = [q1 - q0, q2 - q0]; rows of J^-1 are the gradients of xi and eta.
        let det = q[1][0] * q[2][1] - q[2][0] * q[1][1];
        let g_xi = [q[2][1] / det, -q[2][0] / det];
        let g_eta = [-q[1][1] / det, q[1][0] / det];
        Ok(Panel {
            p,
            normal,
            t1,
            t2,
            area: 0.5 * twice,
            diam,
            centroid: (p[0] + p[1] + p[2]) / 3.0,
            tau,
            nu,
            g_xi,
            g_eta,
            far_ratio: FAR_FIELD_RATIO,
        })
    }

    /// Disables the far-field quadrature switch (closed form everywhere).
    pub fn analytic_only(mut self) -> Self {
        self.far_ratio = f64::INFINITY;
        self
    }

    pub fn point(&self, xi: f64, eta: f64) -> Vec3 {
        self.p[0] + (self.p[1] - self.p[0]) * xi + (self.p[2] - self.p[0]) * eta
    }

    /// Signed solid angle subtended at `x`; positive when `x` is on the normal side.
    pub fn solid_angle(&self, x: &Vec3) -> f64 {
        let a = self.p[0] - x;
        let b = self.p[1] - x;
        let c = self.p[2] - x;
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = -a.dot(&b.cross(&c));
        let den = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
        2.0 * atan2(num, den)
    }

    /// Monomial integrals at `x`; the gradient is skipped unless `gradient` is set.
    pub fn integrals(&self, x: &Vec3, side: Side, gradient: bool, far: &QuadratureRule) -> Result<MonomialIntegrals> {
        let dist2 = (x - self.centroid).norm_squared();
        if dist2 > (self.far_ratio * self.diam) * (self.far_ratio * self.diam) {
            Ok(self.quadrature_integrals(x, gradient, far))
        } else {
            self.analytic_integrals(x, side, gradient)
        }
    }

    /// Plain quadrature with rule `rule`; only valid away from the panel.
    pub fn quadrature_integrals(&self, x: &Vec3, gradient: bool, rule: &QuadratureRule) -> MonomialIntegrals {
        let mut out = MonomialIntegrals::zero();
        let jac = 2.0 * self.area;
        for (pt, w) in rule.points.iter().zip(&rule.weights) {
            let (xi, eta) = (pt[0], pt[1]);
            let d = x - self.point(xi, eta);
            let r2 = d.norm_squared();
            let inv_r = 1.0 / sqrt(r2);
            let m = [1.0, xi, eta, xi * xi, xi * eta, eta * eta];
            let wv = w * jac * inv_r;
            for k in 0..6 {
                out.value[k] += wv * m[k];
            }
            if gradient {
                let gv = d * (-w * jac * inv_r * inv_r * inv_r);
                for k in 0..6 {
                    out.gradient[k] += gv * m[k];
                }
            }
        }
        let s = -1.0 / FOUR_PI;
        for k in 0..6 {
            out.value[k] *= s;
            out.gradient[k] *= s;
        }
        out
    }

    /// Closed-form monomial integrals.
    pub fn analytic_integrals(&self, x: &Vec3, side: Side, gradient: bool) -> Result<MonomialIntegrals> {
        let w0 = self.p[0] - x;
        let mut z = -w0.dot(&self.normal);
        let mut q = [[0.0; 2]; 3];
        for k in 0..3 {
            let w = self.p[k] - x;
            q[k] = [w.dot(&self.t1), w.dot(&self.t2)];
        }
        let eps = GEOM_TOL * self.diam;
        // Signed distances of x0 to the edge lines and edge parameter ranges.
        let mut d = [0.0; 3];
        let mut ta = [0.0; 3];
        let mut tb = [0.0; 3];
        for k in 0..3 {
            let nu = self.nu[k];
            let tau = self.tau[k];
            let a = q[k];
            let b = q[(k + 1) % 3];
            d[k] = a[0] * nu[0] + a[1] * nu[1];
            ta[k] = a[0] * tau[0] + a[1] * tau[1];
            tb[k] = b[0] * tau[0] + b[1] * tau[1];
        }
        let omega;
        if z.abs() <= eps {
            z = 0.0;
            for k in 0..3 {
                if d[k].abs() <= eps && ta[k] <= eps && tb[k] >= -eps {
                    return Err(Error::EdgeSingularity);
                }
            }
            let inside = d.iter().all(|&dk| dk > eps);
            omega = if inside {
                match side {
                    Side::ExteriorTrace => 2.0 * core::f64::consts::PI,
                    Side::InteriorTrace => -2.0 * core::f64::consts::PI,
                    Side::PrincipalValue => 0.0,
                    Side::OffSurface => return Err(Error::OnPanel),
                }
            } else {
                0.0
            };
        } else {
            let z2 = z * z;
            let r = [
                sqrt(q[0][0] * q[0][0] + q[0][1] * q[0][1] + z2),
                sqrt(q[1][0] * q[1][0] + q[1][1] * q[1][1] + z2),
                sqrt(q[2][0] * q[2][0] + q[2][1] * q[2][1] + z2),
            ];
            let dot = |i: usize, j: usize| q[i][0] * q[j][0] + q[i][1] * q[j][1] + z2;
            let den = r[0] * r[1] * r[2] + dot(0, 1) * r[2] + dot(0, 2) * r[1] + dot(1, 2) * r[0];
            omega = 2.0 * atan2(2.0 * self.area * z, den);
        }
        let z2 = z * z;

        // Edge integrals F[j][k] = int_ta^tb t^j r^k dt, k in {-1, +1}.
        // E[alpha] for alpha in [1, s1, s2, s1^2, s1 s2, s2^2], for r^-1 and r^+1.
        let mut em = [[0.0; 6]; 3];
        let mut ep = [[0.0; 6]; 3];
        for k in 0..3 {
            let r0sq = d[k] * d[k] + z2;
            let (a, b) = (ta[k], tb[k]);
            let ra = sqrt(a * a + r0sq);
            let rb = sqrt(b * b + r0sq);
            let log = if a >= 0.0 {
                ln((b + rb) / (a + ra))
            } else if b <= 0.0 {
                ln((ra - a) / (rb - b))
            } else {
                let r0 = sqrt(r0sq);
                asinh(b / r0) - asinh(a / r0)
            };
            let trb = b * rb - a * ra;
            let f0m = log;
            let f1m = rb - ra;
            let f2m = 0.5 * trb - 0.5 * r0sq * log;
            let f0p = 0.5 * trb + 0.5 * r0sq * log;
            let f1p = (rb * rb * rb - ra * ra * ra) / 3.0;
            let f2p = 0.25 * (b * rb * rb * rb - a * ra * ra * ra) - 0.25 * r0sq * f0p;
            let nu = self.nu[k];
            let tau = self.tau[k];
            let dk = d[k];
            let moments = |f0: f64, f1: f64, f2: f64| -> [f64; 6] {
                let s = |i: usize| dk * nu[i] * f0 + tau[i] * f1;
                let ss = |i: usize, j: usize| {
                    dk * dk * nu[i] * nu[j] * f0 + dk * (nu[i] * tau[j] + nu[j] * tau[i]) * f1 + tau[i] * tau[j] * f2
                };
                [f0, s(0), s(1), ss(0, 0), ss(0, 1), ss(1, 1)]
            };
            em[k] = moments(f0m, f1m, f2m);
            ep[k] = moments(f0p, f1p, f2p);
        }
        let sum = |f: &dyn Fn(usize) -> f64| f(0) + f(1) + f(2);
        let nu = &self.nu;

        // I(alpha, -1)
        let i0 = sum(&|k| d[k] * em[k][0]) - z * omega;
        let i0p = (sum(&|k| d[k] * ep[k][0]) + z2 * i0) / 3.0;
        let mut v1 = [0.0; 6];
        v1[0] = i0;
        v1[1] = sum(&|k| nu[k][0] * ep[k][0]);
        v1[2] = sum(&|k| nu[k][1] * ep[k][0]);
        v1[3] = sum(&|k| nu[k][0] * ep[k][1]) - i0p;
        v1[4] = sum(&|k| nu[k][1] * ep[k][1]);
        v1[5] = sum(&|k| nu[k][1] * ep[k][2]) - i0p;

        let mut out = MonomialIntegrals::zero();
        let pm = self.monomial_polys(&q[0]);
        let s = -1.0 / FOUR_PI;
        for m in 0..6 {
            out.value[m] = s * dot6(&pm[m], &v1);
        }
        if !gradient {
            return Ok(out);
        }

        // I(beta, -3) for 1 <= |beta| <= 3, indexed
        // [_, s1, s2, s1^2, s1 s2, s2^2, s1^3, s1^2 s2, s1 s2^2, s2^3].
        let mut w3 = [0.0; 10];
        w3[1] = -sum(&|k| nu[k][0] * em[k][0]);
        w3[2] = -sum(&|k| nu[k][1] * em[k][0]);
        w3[3] = i0 - sum(&|k| nu[k][0] * em[k][1]);
        w3[4] = -sum(&|k| nu[k][1] * em[k][1]);
        w3[5] = i0 - sum(&|k| nu[k][1] * em[k][2]);
        w3[6] = 2.0 * v1[1] - sum(&|k| nu[k][0] * em[k][3]);
        w3[7] = -sum(&|k| nu[k][1] * em[k][3]);
        w3[8] = -sum(&|k| nu[k][0] * em[k][5]);
        w3[9] = 2.0 * v1[2] - sum(&|k| nu[k][1] * em[k][5]);
        // z * I(alpha, -3)
        let n3 = [omega, z * w3[1], z * w3[2], z * w3[3], z * w3[4], z * w3[5]];
        const PLUS1: [usize; 6] = [1, 3, 4, 6, 7, 8];
        const PLUS2: [usize; 6] = [2, 4, 5, 7, 8, 9];
        let g1: [f64; 6] = core::array::from_fn(|a| w3[PLUS1[a]]);
        let g2: [f64; 6] = core::array::from_fn(|a| w3[PLUS2[a]]);
        for m in 0..6 {
            let a = dot6(&pm[m], &g1);
            let b = dot6(&pm[m], &g2);
            let c = dot6(&pm[m], &n3);
            out.gradient[m] = (self.t1 * a + self.t2 * b - self.normal * c) * s;
        }
        Ok(out)
    }

    /// Reference monomials as polynomials in the in-plane coordinates `s`
    /// (origin at `x0`), given the local coordinates `q0` of vertex 0.
    fn monomial_polys(&self, q0: &[f64; 2]) -> [[f64; 6]; 6] {
        let gx = self.g_xi;
        let ge = self.g_eta;
        let ax = -(gx[0] * q0[0] + gx[1] * q0[1]);
        let ae = -(ge[0] * q0[0] + ge[1] * q0[1]);
        [
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [ax, gx[0], gx[1], 0.0, 0.0, 0.0],
            [ae, ge[0], ge[1], 0.0, 0.0, 0.0],
            [ax * ax, 2.0 * ax * gx[0], 2.0 * ax * gx[1], gx[0] * gx[0], 2.0 * gx[0] * gx[1], gx[1] * gx[1]],
            [
                ax * ae,
                ax * ge[0] + ae * gx[0],
                ax * ge[1] + ae * gx[1],
                gx[0] * ge[0],
                gx[0] * ge[1] + gx[1] * ge[0],
                gx[1] * ge[1],
            ],
            [ae * ae, 2.0 * ae * ge[0], 2.0 * ae * ge[1], ge[0] * ge[0], 2.0 * ge[0] * ge[1], ge[1] * ge[1]],
        ]
    }
}

#[inline]
fn dot6(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3] + a[4] * b[4] + a[5] * b[5]
}

/// Value and gradient of the single layer potential of one basis polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelIntegral {
    pub value: f64,
    pub gradient: Vec3,
}

/// `-1/(4 pi) int_T b(y)/|x - y| ds_y` and its gradient, in closed form.
pub fn slp_panel(x: &Vec3, triangle: &[Vec3; 3], density: &LocalPoly, side: Side) -> Result<PanelIntegral> {
    let panel = Panel::new(*triangle)?;
    let m = panel.analytic_integrals(x, side, true)?;
    Ok(PanelIntegral { value: m.value_of(density), gradient: m.gradient_of(density) })
}

/// Density value of `b` at reference point `(xi, eta)`; re-exported for callers.
pub fn density_at(b: &LocalPoly, xi: f64, eta: f64) -> f64 {
    eval_poly(b, xi, eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{gauss_legendre, regular_rule, QuadratureRule};
    use crate::space::Space;
    use alloc::vec::Vec;

    /// Oracle: tensor Gauss on the Duffy map collapsed at each vertex of a
    /// split at the projection point, adaptively subdivided.
    fn oracle(x: &Vec3, p: &[Vec3; 3], b: &LocalPoly) -> (f64, Vec3) {
        let (gx, gw) = gauss_legendre(80);
        let e1 = p[1] - p[0];
        let e2 = p[2] - p[0];
        let n = e1.cross(&e2).normalize();
        let x0 = x - n * (x - p[0]).dot(&n);
        // Split into three triangles sharing the projection point.
        let mut val = 0.0;
        let mut grad = Vec3::zeros();
        for k in 0..3 {
            let a = p[k];
            let c = p[(k + 1) % 3];
            for i in 0..gx.len() {
                for j in 0..gx.len() {
                    let (u, v) = (gx[i], gx[j]);
                    // y = x0 + u (a - x0) + u v (c - a)
                    let y = x0 + (a - x0) * u + (c - a) * (u * v);
                    let jac = (a - x0).cross(&(c - a)).dot(&n) * u;
                    let w = gw[i] * gw[j] * jac;
                            let t = {
                        let r = y - p[0];
                        let m = nalgebra::Matrix2::new(e1.dot(&e1), e1.dot(&e2), e1.dot(&e2), e2.dot(&e2));
                        m.try_inverse().unwrap() * nalgebra::Vector2::new(r.dot(&e1), r.dot(&e2))
                    };
                    let bv = eval_poly(b, t[0], t[1]);
                    let d = x - y;
                    let r = d.norm();
                    val += w * bv / r;
                    grad -= d * (w * bv / (r * r * r));
                }
            }
        }
        (-val / FOUR_PI, -grad / FOUR_PI)
    }

    /// Oracle: recursive 4-split with a degree-12 rule, for off-panel points.
    fn adaptive(x: &Vec3, p: &[Vec3; 3], b: &LocalPoly) -> (f64, Vec3) {
        let rule = regular_rule(12).unwrap();
        let e1 = p[1] - p[0];
        let e2 = p[2] - p[0];
        let area2 = e1.cross(&e2).norm();
        // Sub-triangles in reference coordinates.
        fn rec(
            x: &Vec3, p: &[Vec3; 3], b: &LocalPoly, area2: f64, rule: &QuadratureRule,
            c: [[f64; 2]; 3], depth: usize,
        ) -> (f64, Vec3) {
            let eval = |c: &[[f64; 2]; 3]| {
                let jac = area2 * ((c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]));
                let mut v = 0.0;
                let mut g = Vec3::zeros();
                for (pt, w) in rule.points.iter().zip(&rule.weights) {
                    let xi = c[0][0] + pt[0] * (c[1][0] - c[0][0]) + pt[1] * (c[2][0] - c[0][0]);
                    let eta = c[0][1] + pt[0] * (c[1][1] - c[0][1]) + pt[1] * (c[2][1] - c[0][1]);
                    let y = p[0] + (p[1] - p[0]) * xi + (p[2] - p[0]) * eta;
                    let d = x - y;
                    let r = d.norm();
                    let bv = eval_poly(b, xi, eta) * w * jac;
                    v += bv / r;
                    g -= d * (bv / (r * r * r));
                }
                (v, g)
            };
            let mid = |a: [f64; 2], b: [f64; 2]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let (m01, m12, m20) = (mid(c[0], c[1]), mid(c[1], c[2]), mid(c[2], c[0]));
            let kids = [[c[0], m01, m20], [m01, c[1], m12], [m20, m12, c[2]], [m01, m12, m20]];
            let whole = eval(&c);
            let mut v = 0.0;
            let mut g = Vec3::zeros();
            for k in &kids {
                let (a, b) = eval(k);
                v += a;
                g += b;
            }
            if depth > 14 || ((v - whole.0).abs() < 1e-16 && (g - whole.1).norm() < 1e-15) {
                return (v, g);
            }
            let mut v = 0.0;
            let mut g = Vec3::zeros();
            for k in kids {
                let (a, b) = rec(x, p, b, area2, rule, k, depth + 1);
                v += a;
                g += b;
            }
            (v, g)
        }
        let (v, g) = rec(x, p, b, area2, &rule, [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 0);
        (-v / FOUR_PI, -g / FOUR_PI)
    }

    fn right_triangle() -> [Vec3; 3] {
        [Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)]
    }

    fn skew_triangle() -> [Vec3; 3] {
        [Vec3::new(0.1, -0.2, 0.3), Vec3::new(1.2, 0.1, 0.0), Vec3::new(0.3, 0.9, 0.5)]
    }

    #[test]
    fn constant_density_matches_oracle() {
        let x = Vec3::new(0.25, 0.25, 0.5);
        let b = Space::P0.local_basis()[0];
        let r = slp_panel(&x, &right_triangle(), &b, Side::OffSurface).unwrap();
        let (v, g) = adaptive(&x, &right_triangle(), &b);
        assert!((r.value - v).abs() < 1e-10 * v.abs(), "{} {}", r.value, v);
        assert!((r.gradient - g).norm() < 1e-10 * g.norm());
    }

    #[test]
    fn p2_basis_matches_oracle_off_panel() {
        let tri = skew_triangle();
        let panel = Panel::new(tri).unwrap();
        let pts = [
            panel.point(0.3, 0.3) + panel.normal * 0.2,
            panel.point(0.9, 0.6) - panel.normal * 0.05,
            panel.point(-0.4, 0.2) + panel.normal * 0.3,
            panel.point(0.5, -0.5) + panel.normal * 1e-3,
            panel.point(0.2, 0.0) + panel.normal * 0.4,
            panel.centroid + Vec3::new(3.0, -2.0, 1.0),
        ];
        for x in &pts {
            for b in Space::P2.local_basis() {
                let r = slp_panel(x, &tri, b, Side::OffSurface).unwrap();
                let (v, g) = adaptive(x, &tri, b);
                let scale = v.abs().max(1e-3);
                assert!((r.value - v).abs() < 1e-11 * scale, "{x:?}: {} vs {}", r.value, v);
                assert!((r.gradient - g).norm() < 1e-9 * g.norm().max(1e-2), "{x:?}: {:?} vs {:?}", r.gradient, g);
            }
        }
    }

    #[test]
    fn on_panel_value_matches_oracle() {
        let tri = skew_triangle();
        let panel = Panel::new(tri).unwrap();
        for (xi, eta) in [(0.2, 0.3), (0.45, 0.3), (0.15, 0.7)] {
            let x = panel.point(xi, eta);
            for b in Space::P2.local_basis() {
                let r = slp_panel(&x, &tri, b, Side::ExteriorTrace).unwrap();
                let (v, _) = oracle(&x, &tri, b);
                assert!((r.value - v).abs() < 1e-11 * v.abs().max(1e-3), "{} vs {}", r.value, v);
            }
        }
        // In-plane points outside the triangle.
        let x = panel.point(1.2, 0.4);
        let b = Space::P2.local_basis()[4];
        let r = slp_panel(&x, &tri, &b, Side::OffSurface).unwrap();
        let (v, g) = adaptive(&x, &tri, &b);
        assert!((r.value - v).abs() < 1e-11 * v.abs());
        assert!((r.gradient - g).norm() < 1e-9 * g.norm());
    }

    #[test]
    fn traces_and_jump() {
        let tri = skew_triangle();
        let panel = Panel::new(tri).unwrap();
        let (xi, eta) = (0.3, 0.25);
        let x = panel.point(xi, eta);
        for b in Space::P2.local_basis() {
            let ext = slp_panel(&x, &tri, b, Side::ExteriorTrace).unwrap();
            let int = slp_panel(&x, &tri, b, Side::InteriorTrace).unwrap();
            let pv = slp_panel(&x, &tri, b, Side::PrincipalValue).unwrap();
            assert!((ext.value - int.value).abs() < 1e-15);
            let jump = (ext.gradient - int.gradient).dot(&panel.normal);
            assert!((jump - eval_poly(b, xi, eta)).abs() < 1e-12);
            assert!((pv.gradient - (ext.gradient + int.gradient) * 0.5).norm() < 1e-12);
            // Exterior trace is the limit of off-surface values.
            let h = 1e-7;
            let near = slp_panel(&(x + panel.normal * h), &tri, b, Side::OffSurface).unwrap();
            assert!((near.gradient - ext.gradient).norm() < 1e-5, "{:?} {:?}", near.gradient, ext.gradient);
            let below = slp_panel(&(x - panel.normal * h), &tri, b, Side::OffSurface).unwrap();
            assert!((below.gradient - int.gradient).norm() < 1e-5);
        }
        assert_eq!(slp_panel(&x, &tri, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], Side::OffSurface), Err(Error::OnPanel));
        assert_eq!(
            slp_panel(&panel.point(0.5, 0.0), &tri, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], Side::ExteriorTrace),
            Err(Error::EdgeSingularity)
        );
        assert_eq!(slp_panel(&tri[2], &tri, &[1.0; 6], Side::ExteriorTrace), Err(Error::EdgeSingularity));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let tri = skew_triangle();
        let panel = Panel::new(tri).unwrap();
        let x = panel.point(0.4, 0.1) + panel.normal * 0.07 + panel.t1 * 0.02;
        for b in Space::P2.local_basis() {
            let g = slp_panel(&x, &tri, b, Side::OffSurface).unwrap().gradient;
            let h = 1e-5;
            for k in 0..3 {
                let mut e = Vec3::zeros();
                e[k] = h;
                let fp = slp_panel(&(x + e), &tri, b, Side::OffSurface).unwrap().value;
                let fm = slp_panel(&(x - e), &tri, b, Side::OffSurface).unwrap().value;
                assert!(((fp - fm) / (2.0 * h) - g[k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn far_field_monopole() {
        let tri = skew_triangle();
        let panel = Panel::new(tri).unwrap();
        let far = regular_rule(FAR_FIELD_ORDER).unwrap();
        let b = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for dir in [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.3, -0.5, 0.8).normalize(), panel.normal] {
            let x = panel.centroid + dir * (1e3 * panel.diam);
            let m = panel.integrals(&x, Side::OffSurface, true, &far).unwrap();
            let mono = -panel.area / (FOUR_PI * (x - panel.centroid).norm());
            assert!((m.value_of(&b) - mono).abs() < 1e-6 * mono.abs(), "{} {}", m.value_of(&b), mono);
        }
    }

    #[test]
    fn analytic_and_quadrature_agree_at_far_field_switch() {
        let tri = skew_triangle();
        let panel = Panel::new(tri).unwrap().analytic_only();
        let rule = regular_rule(16).unwrap();
        let far = regular_rule(FAR_FIELD_ORDER).unwrap();
        for ratio in [2.0, FAR_FIELD_RATIO] {
            let x = panel.centroid + Vec3::new(0.6, 0.5, 0.62).normalize() * (ratio * panel.diam);
            let a = panel.analytic_integrals(&x, Side::OffSurface, true).unwrap();
            let q = panel.quadrature_integrals(&x, true, &rule);
            let f = panel.quadrature_integrals(&x, true, &far);
            let mut worst: f64 = 0.0;
            for k in (0..6).filter(|_| ratio >= FAR_FIELD_RATIO) {
                worst = worst.max((f.value[k] - q.value[k]).abs() / q.value[0].abs());
                worst = worst.max((f.gradient[k] - q.gradient[k]).norm() / q.gradient[0].norm());
            }
            for k in 0..6 {
                worst = worst.max((a.value[k] - q.value[k]).abs() / a.value[0].abs());
                worst = worst.max((a.gradient[k] - q.gradient[k]).norm() / a.gradient[0].norm());
            }
            assert!(worst < 1e-10, "ratio {ratio}: {worst:e}");
        }
    }

    #[test]
    fn zero_density() {
        let r = slp_panel(&Vec3::new(0.2, 0.2, 0.1), &right_triangle(), &[0.0; 6], Side::OffSurface).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.gradient, Vec3::zeros());
    }

    #[test]
    fn degenerate_panel_rejected() {
        let tri = [Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0];
        assert!(slp_panel(&Vec3::z(), &tri, &[1.0; 6], Side::OffSurface).is_err());
    }

    fn rotation(a: f64, b: f64, c: f64) -> crate::Mat3 {
        *nalgebra::Rotation3::from_euler_angles(a, b, c).matrix()
    }

    proptest::proptest! {
        #[test]
        fn rigid_motion_equivariance(
            a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0,
            tx in -2.0f64..2.0, ty in -2.0f64..2.0, tz in -2.0f64..2.0,
            px in -1.0f64..2.0, py in -1.0f64..2.0, pz in 0.05f64..1.0,
            k in 0usize..6,
        ) {
            let tri = skew_triangle();
            let panel = Panel::new(tri).unwrap();
            let x = panel.point(px, py) + panel.normal * pz;
            let r = rotation(a, b, c);
            let t = Vec3::new(tx, ty, tz);
            let moved: [Vec3; 3] = core::array::from_fn(|i| r * tri[i] + t);
            let basis = Space::P2.local_basis()[k];
            let base = slp_panel(&x, &tri, &basis, Side::OffSurface).unwrap();
            let rot = slp_panel(&(r * x + t), &moved, &basis, Side::OffSurface).unwrap();
            proptest::prop_assert!((base.value - rot.value).abs() < 1e-11 * base.value.abs().max(1e-3), "{} {}", base.value, rot.value);
            proptest::prop_assert!((r * base.gradient - rot.gradient).norm() < 1e-10 * base.gradient.norm().max(1e-3));
        }

        #[test]
        fn value_continuous_across_panel(xi in 0.05f64..0.9, eta in 0.05f64..0.9, k in 0usize..6) {
            proptest::prop_assume!(xi + eta < 0.95);
            let tri = skew_triangle();
            let panel = Panel::new(tri).unwrap();
            let x = panel.point(xi, eta);
            let basis = Space::P2.local_basis()[k];
            let on = slp_panel(&x, &tri, &basis, Side::ExteriorTrace).unwrap().value;
            let up = slp_panel(&(x + panel.normal * 1e-9), &tri, &basis, Side::OffSurface).unwrap().value;
            let down = slp_panel(&(x - panel.normal * 1e-9), &tri, &basis, Side::OffSurface).unwrap().value;
            proptest::prop_assert!((on - up).abs() < 1e-8 && (on - down).abs() < 1e-8);
        }
    }

    #[test]
    fn p1_and_p0_bases() {
        let tri = skew_triangle();
        let x = Vec3::new(0.4, 0.3, 1.0);
        let all: Vec<f64> = Space::P1Disc
            .local_basis()
            .iter()
            .map(|b| slp_panel(&x, &tri, b, Side::OffSurface).unwrap().value)
            .collect();
        let c = slp_panel(&x, &tri, &Space::P0.local_basis()[0], Side::OffSurface).unwrap().value;
        assert!((all.iter().sum::<f64>() - c).abs() < 1e-14);
    }
}

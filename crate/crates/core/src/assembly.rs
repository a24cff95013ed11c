//! Galerkin matrices of the single layer operator `V` and the oblique
//! operator `B = V + p.v.(h . grad V) + 1/2 (h . n)` on flat triangulations.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::kernels::{Panel, Side, FAR_FIELD_ORDER};
use crate::math;
use crate::mesh::SurfaceMap;
use crate::quadrature::{composite_rule, edge_graded_rule, regular_rule, self_graded_rule, Grading, QuadratureRule};
use crate::space::{eval_poly, DofLayout};
use crate::{Error, Result, Vec3};

/// Outer quadrature parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Degree of the regular outer rule; also defines the standard outer points.
    pub order: usize,
    /// Grading for touching facet pairs.
    pub grading: Grading,
    /// Separated pairs raise the outer degree until `(diam / (2 dist))^(degree + 1)`
    /// drops below this value.
    pub separation_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { order: 5, grading: Grading::default(), separation_tol: 1e-10 }
    }
}

/// How the side functions `A_j = x_j / |x|^3` enter the discrete systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxMode {
    /// `A_j` is a density and the operator is applied to it: column `<Op A_j, b_i>`.
    Density,
    /// `A_j` is a surface function on the data side: column `<A_j, b_i>`.
    Data,
}

/// Per-facet constant direction field `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObliqueField {
    pub h: Vec<Vec3>,
}

impl ObliqueField {
    pub fn new(h: Vec<Vec3>) -> Result<Self> {
        if let Some(t) = h.iter().position(|v| !(v.norm() > 0.0)) {
            return Err(Error::ZeroObliqueField(t));
        }
        Ok(ObliqueField { h })
    }

    /// Midpoint interpolation of vertex values.
    pub fn from_vertex_values(map: &SurfaceMap, values: &[Vec3]) -> Result<Self> {
        let h = map
            .base
            .triangles
            .iter()
            .map(|tri| (values[tri[0]] + values[tri[1]] + values[tri[2]]) / 3.0)
            .collect();
        Self::new(h)
    }

    /// `cos(beta)` per facet, `beta` the angle between normal and `h`.
    pub fn cos_beta(&self, map: &SurfaceMap) -> Result<Vec<f64>> {
        self.h.iter().enumerate().map(|(t, h)| Ok(map.frame(t)?.normal.dot(h) / h.norm())).collect()
    }
}

/// Which parts of `B` to include; all on by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObliqueTerms {
    pub jump: bool,
    pub kprime: bool,
}

impl Default for ObliqueTerms {
    fn default() -> Self {
        ObliqueTerms { jump: true, kprime: true }
    }
}

#[derive(Debug, Clone)]
pub struct AssembledSystem {
    /// `-<V b_j, b_i>`, symmetric positive definite.
    pub slp: DMatrix<f64>,
    /// `<B b_j, b_i>` under the negative kernel, when assembled.
    pub oblique: Option<DMatrix<f64>>,
    pub aux_columns: [DVector<f64>; 3],
    pub constraint_rows: [DVector<f64>; 3],
    pub load: DVector<f64>,
    pub aux_mode: AuxMode,
}

/// Highest outer degree used for separated pairs.
pub const MAX_SEPARATED_ORDER: usize = 21;

/// Quadrature rules for every facet-pair class.
#[derive(Debug, Clone)]
pub struct OuterRules {
    /// Regular rules of degree `order..=max(order, MAX_SEPARATED_ORDER)`.
    pub separated: Vec<QuadratureRule>,
    pub vertex: [QuadratureRule; 3],
    pub edge: [QuadratureRule; 3],
    pub identical: QuadratureRule,
    pub far_inner: QuadratureRule,
    order: usize,
    log_tol: f64,
}

impl OuterRules {
    pub fn new(cfg: &QuadratureConfig) -> Result<Self> {
        if !(cfg.separation_tol > 0.0 && cfg.separation_tol < 1.0) {
            return Err(Error::InvalidArgument("separation_tol must lie in (0, 1)".into()));
        }
        let v = composite_rule(cfg.order, cfg.grading)?;
        let e = edge_graded_rule(cfg.order, cfg.grading)?;
        let separated = (cfg.order..=cfg.order.max(MAX_SEPARATED_ORDER))
            .map(regular_rule)
            .collect::<Result<Vec<_>>>()?;
        Ok(OuterRules {
            separated,
            vertex: [v.rotated(0), v.rotated(1), v.rotated(2)],
            edge: [e.rotated(0), e.rotated(1), e.rotated(2)],
            identical: self_graded_rule(cfg.order, cfg.grading)?,
            far_inner: regular_rule(FAR_FIELD_ORDER)?,
            order: cfg.order,
            log_tol: math::ln(cfg.separation_tol),
        })
    }

    /// Outer degree for a separated pair at centroid distance `dist`.
    pub fn separated_order(&self, diam: f64, dist: f64) -> usize {
        let eta = diam / (2.0 * dist);
        if eta >= 1.0 {
            return self.order + self.separated.len() - 1;
        }
        let need = (self.log_tol / math::ln(eta) - 1.0).max(0.0);
        let extra = (need as usize + 1).saturating_sub(self.order);
        self.order + extra.min(self.separated.len() - 1)
    }

    /// Rule on outer facet `i` for the inner facet `j`.
    pub fn select(&self, map: &SurfaceMap, panels: &[Panel], i: usize, j: usize) -> &QuadratureRule {
        if i == j {
            return &self.identical;
        }
        let ti = map.base.triangles[i];
        let tj = map.base.triangles[j];
        let shared: [bool; 3] = core::array::from_fn(|k| tj.contains(&ti[k]));
        match shared.iter().filter(|s| **s).count() {
            2 => {
                let k = (0..3).find(|&k| shared[k] && shared[(k + 1) % 3]).unwrap();
                &self.edge[k]
            }
            1 => &self.vertex[(0..3).find(|&k| shared[k]).unwrap()],
            _ => {
                let d = (panels[i].centroid - panels[j].centroid).norm();
                let o = self.separated_order(panels[i].diam.max(panels[j].diam), d);
                &self.separated[o - self.order]
            }
        }
    }
}

pub fn panels(map: &SurfaceMap) -> Result<Vec<Panel>> {
    (0..map.triangle_count())
        .map(|t| Panel::new(map.triangle_points(t)).map_err(|_| Error::DegenerateTriangle(t)))
        .collect()
}

#[cfg(feature = "parallel")]
pub fn map_indices<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indices<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Local blocks of one outer facet against every inner facet.
struct RowBlocks {
    slp: Vec<f64>,
    kprime: Vec<f64>,
}

fn outer_facet_blocks(
    map: &SurfaceMap,
    layout: &DofLayout,
    panels: &[Panel],
    rules: &OuterRules,
    h: Option<&Vec3>,
    i: usize,
) -> Result<RowBlocks> {
    let nt = map.triangle_count();
    let nl = layout.local_count();
    let basis = layout.space.local_basis();
    let mut slp = vec![0.0; nt * nl * nl];
    let mut kprime = if h.is_some() { vec![0.0; nt * nl * nl] } else { Vec::new() };
    let pi = &panels[i];
    let jac = 2.0 * pi.area;
    let mut bo = [0.0; 6];
    let mut vals = [0.0; 6];
    let mut hg = [0.0; 6];
    for j in 0..nt {
        let rule = rules.select(map, panels, i, j);
        let pj = &panels[j];
        let base = j * nl * nl;
        for (pt, w) in rule.points.iter().zip(&rule.weights) {
            let x = pi.point(pt[0], pt[1]);
            let m = pj.integrals(&x, Side::PrincipalValue, h.is_some(), &rules.far_inner)?;
            let ww = w * jac;
            for a in 0..nl {
                bo[a] = ww * eval_poly(&basis[a], pt[0], pt[1]);
            }
            for b in 0..nl {
                vals[b] = m.value_of(&basis[b]);
            }
            for a in 0..nl {
                for b in 0..nl {
                    slp[base + a * nl + b] += bo[a] * vals[b];
                }
            }
            if let Some(h) = h {
                for b in 0..nl {
                    hg[b] = h.dot(&m.gradient_of(&basis[b]));
                }
                for a in 0..nl {
                    for b in 0..nl {
                        kprime[base + a * nl + b] += bo[a] * hg[b];
                    }
                }
            }
        }
    }
    Ok(RowBlocks { slp, kprime })
}

/// `<V b_j, b_i>` (negative kernel) and optionally `<(B - V) b_j, b_i>`.
fn assemble_pass(
    map: &SurfaceMap,
    layout: &DofLayout,
    h: Option<&ObliqueField>,
    terms: ObliqueTerms,
    cfg: &QuadratureConfig,
) -> Result<(DMatrix<f64>, Option<DMatrix<f64>>)> {
    let n = layout.dof_count;
    let nt = map.triangle_count();
    let nl = layout.local_count();
    let panels = panels(map)?;
    let rules = OuterRules::new(cfg)?;
    let mut v = DMatrix::<f64>::zeros(n, n);
    let mut k = h.map(|_| DMatrix::<f64>::zeros(n, n));
    let batch = 32;
    let mut start = 0;
    while start < nt {
        let end = (start + batch).min(nt);
        let blocks = map_indices(end - start, |o| {
            let i = start + o;
            let hi = h.filter(|_| terms.kprime).map(|f| &f.h[i]);
            outer_facet_blocks(map, layout, &panels, &rules, hi, i)
        });
        for (o, blk) in blocks.into_iter().enumerate() {
            let blk = blk?;
            let i = start + o;
            let di = layout.dofs(i);
            for j in 0..nt {
                let dj = layout.dofs(j);
                let base = j * nl * nl;
                for a in 0..nl {
                    for b in 0..nl {
                        v[(di[a], dj[b])] += blk.slp[base + a * nl + b];
                    }
                }
                if let (Some(k), false) = (k.as_mut(), blk.kprime.is_empty()) {
                    for a in 0..nl {
                        for b in 0..nl {
                            k[(di[a], dj[b])] += blk.kprime[base + a * nl + b];
                        }
                    }
                }
            }
        }
        start = end;
    }
    let vt = v.transpose();
    v = (&v + vt) * 0.5;
    if let (Some(k), Some(h)) = (k.as_mut(), h) {
        if terms.jump {
            let mass = local_mass(layout)?;
            for t in 0..nt {
                let f = map.frame(t)?;
                let c = 0.5 * h.h[t].dot(&f.normal) * 2.0 * f.area;
                let d = layout.dofs(t);
                for a in 0..nl {
                    for b in 0..nl {
                        k[(d[a], d[b])] += c * mass[a * nl + b];
                    }
                }
            }
        }
        *k += &v;
    }
    Ok((v, k))
}

/// Reference-triangle mass matrix of the local basis (row-major).
fn local_mass(layout: &DofLayout) -> Result<Vec<f64>> {
    let basis = layout.space.local_basis();
    let nl = basis.len();
    let rule = regular_rule(5)?;
    let mut m = vec![0.0; nl * nl];
    for a in 0..nl {
        for b in 0..nl {
            m[a * nl + b] = rule.integrate(|x, y| eval_poly(&basis[a], x, y) * eval_poly(&basis[b], x, y));
        }
    }
    Ok(m)
}

/// Stored (negated, positive definite) single layer matrix `-<V b_j, b_i>`.
pub fn assemble_slp(map: &SurfaceMap, layout: &DofLayout, cfg: &QuadratureConfig) -> Result<DMatrix<f64>> {
    Ok(-assemble_pass(map, layout, None, ObliqueTerms::default(), cfg)?.0)
}

/// `<B b_j, b_i>` under the negative kernel.
pub fn assemble_oblique(
    map: &SurfaceMap,
    layout: &DofLayout,
    h: &ObliqueField,
    cfg: &QuadratureConfig,
) -> Result<DMatrix<f64>> {
    assemble_oblique_with(map, layout, h, ObliqueTerms::default(), cfg)
}

pub fn assemble_oblique_with(
    map: &SurfaceMap,
    layout: &DofLayout,
    h: &ObliqueField,
    terms: ObliqueTerms,
    cfg: &QuadratureConfig,
) -> Result<DMatrix<f64>> {
    Ok(assemble_pass(map, layout, Some(h), terms, cfg)?.1.unwrap())
}

/// Stored SLP matrix and `B` from one pass over facet pairs.
pub fn assemble_both(
    map: &SurfaceMap,
    layout: &DofLayout,
    h: &ObliqueField,
    cfg: &QuadratureConfig,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (v, b) = assemble_pass(map, layout, Some(h), ObliqueTerms::default(), cfg)?;
    Ok((-v, b.unwrap()))
}

/// `A_j(x) = x_j / |x|^3`.
pub fn side_function(x: &Vec3) -> Vec3 {
    let r = x.norm();
    x / (r * r * r)
}

/// Interpolation coefficients of `A_1, A_2, A_3` in the density space.
pub fn side_function_coefficients(map: &SurfaceMap, layout: &DofLayout) -> Result<[DVector<f64>; 3]> {
    let mut out: [DVector<f64>; 3] = core::array::from_fn(|_| DVector::zeros(layout.dof_count));
    let mut bad = false;
    for k in 0..3 {
        out[k] = DVector::from_vec(layout.interpolate(|t, xi, eta| {
            let x = map.point(t, xi, eta);
            if x.norm() < 1e-12 {
                bad = true;
            }
            side_function(&x)[k]
        }));
    }
    if bad {
        return Err(Error::OriginOnSurface);
    }
    Ok(out)
}

/// Constraint rows `<b_i, A_k>`.
pub fn constraint_rows(map: &SurfaceMap, layout: &DofLayout) -> Result<[DVector<f64>; 3]> {
    let rule = regular_rule(5)?;
    let basis = layout.space.local_basis();
    let mut rows: [DVector<f64>; 3] = core::array::from_fn(|_| DVector::zeros(layout.dof_count));
    for t in 0..map.triangle_count() {
        let area = map.frame(t)?.area;
        for (pt, w) in rule.points.iter().zip(&rule.weights) {
            let x = map.point(t, pt[0], pt[1]);
            if x.norm() < 1e-12 {
                return Err(Error::OriginOnSurface);
            }
            let a = side_function(&x);
            for (b, &d) in basis.iter().zip(layout.dofs(t)) {
                let v = w * 2.0 * area * eval_poly(b, pt[0], pt[1]);
                for k in 0..3 {
                    rows[k][d] += v * a[k];
                }
            }
        }
    }
    Ok(rows)
}

/// Aux columns and constraint rows.
///
/// `operator` is the negative-kernel matrix the columns are built with
/// (`-slp` for the Dirichlet problem, `B` for the oblique problem).
pub fn assemble_aux_and_constraints(
    map: &SurfaceMap,
    layout: &DofLayout,
    operator: &DMatrix<f64>,
    mode: AuxMode,
) -> Result<([DVector<f64>; 3], [DVector<f64>; 3])> {
    let rows = constraint_rows(map, layout)?;
    let cols = match mode {
        AuxMode::Density => {
            let a = side_function_coefficients(map, layout)?;
            [operator * &a[0], operator * &a[1], operator * &a[2]]
        }
        AuxMode::Data => rows.clone(),
    };
    Ok((cols, rows))
}

/// Standard outer points: the regular rule of `cfg.order` on each facet, facet-major.
pub fn outer_points(map: &SurfaceMap, cfg: &QuadratureConfig) -> Result<Vec<Vec3>> {
    let rule = regular_rule(cfg.order)?;
    let mut out = Vec::with_capacity(map.triangle_count() * rule.len());
    for t in 0..map.triangle_count() {
        for pt in &rule.points {
            out.push(map.point(t, pt[0], pt[1]));
        }
    }
    Ok(out)
}

/// `<F, b_i>` with `F` given at the standard outer points.
pub fn assemble_load(map: &SurfaceMap, layout: &DofLayout, values: &[f64], cfg: &QuadratureConfig) -> Result<DVector<f64>> {
    let rule = regular_rule(cfg.order)?;
    let np = rule.len();
    if values.len() != map.triangle_count() * np {
        return Err(Error::SizeMismatch { expected: map.triangle_count() * np, got: values.len() });
    }
    let basis = layout.space.local_basis();
    let mut out = DVector::zeros(layout.dof_count);
    for t in 0..map.triangle_count() {
        let area = map.frame(t)?.area;
        for (q, (pt, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let f = values[t * np + q] * w * 2.0 * area;
            for (b, &d) in basis.iter().zip(layout.dofs(t)) {
                out[d] += f * eval_poly(b, pt[0], pt[1]);
            }
        }
    }
    Ok(out)
}

/// Galerkin mass matrix `<b_j, b_i>`.
pub fn mass_matrix(map: &SurfaceMap, layout: &DofLayout) -> Result<DMatrix<f64>> {
    let nl = layout.local_count();
    let m = local_mass(layout)?;
    let mut out = DMatrix::zeros(layout.dof_count, layout.dof_count);
    for t in 0..map.triangle_count() {
        let area = map.frame(t)?.area;
        let d = layout.dofs(t);
        for a in 0..nl {
            for b in 0..nl {
                out[(d[a], d[b])] += 2.0 * area * m[a * nl + b];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_icosphere, SurfaceMap};
    use crate::space::{p2_dof_layout, Space};

    fn sphere(level: usize) -> (SurfaceMap, DofLayout) {
        let m = build_icosphere(level).unwrap();
        let l = p2_dof_layout(&m);
        (SurfaceMap::new(m).unwrap(), l)
    }

    fn half_position(map: &SurfaceMap) -> ObliqueField {
        ObliqueField::from_vertex_values(map, &map.positions.iter().map(|p| p * 0.5).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn slp_symmetric_positive_definite() {
        let (map, layout) = sphere(1);
        let s = assemble_slp(&map, &layout, &QuadratureConfig::default()).unwrap();
        let asym = (&s - s.transpose()).amax() / s.amax();
        assert!(asym <= 1e-10);
        assert!(s.clone().cholesky().is_some());
    }

    #[test]
    fn oblique_reduces_to_slp() {
        let (map, layout) = sphere(0);
        let cfg = QuadratureConfig::default();
        let h = half_position(&map);
        let b = assemble_oblique_with(&map, &layout, &h, ObliqueTerms { jump: false, kprime: false }, &cfg).unwrap();
        let s = assemble_slp(&map, &layout, &cfg).unwrap();
        assert!((b + s).amax() < 1e-14);
        assert!(ObliqueField::new(vec![Vec3::zeros()]).is_err());
    }

    #[test]
    fn b_matrix_sphere_identity() {
        let mut last = f64::INFINITY;
        for level in 1..=2 {
            let (map, layout) = sphere(level);
            let h = half_position(&map);
            let b = assemble_oblique(&map, &layout, &h, &QuadratureConfig::default()).unwrap();
            let m = mass_matrix(&map, &layout).unwrap();
            let ones = DVector::from_element(layout.dof_count, 1.0);
            let lhs = &b * &ones;
            let rhs = &m * &ones * -0.5;
            let rel = (&lhs - &rhs).norm() / rhs.norm();
            assert!(rel < last);
            if level == 2 {
                assert!(rel <= 0.03, "{rel}");
            }
            last = rel;
        }
    }

    #[test]
    fn load_vector_examples() {
        let (map, layout) = sphere(1);
        let cfg = QuadratureConfig::default();
        let np = 7 * map.triangle_count();
        assert_eq!(assemble_load(&map, &layout, &vec![0.0; np], &cfg).unwrap().amax(), 0.0);
        let ones = assemble_load(&map, &layout, &vec![1.0; np], &cfg).unwrap();
        assert!((ones.sum() - map.total_area()).abs() < 1e-13);
        // F = b_k reproduces the k-th mass matrix column.
        let k = 17;
        let rule = regular_rule(5).unwrap();
        let mut f = Vec::with_capacity(np);
        let mut coeff = vec![0.0; layout.dof_count];
        coeff[k] = 1.0;
        for t in 0..map.triangle_count() {
            for p in &rule.points {
                f.push(layout.evaluate(&coeff, t, p[0], p[1]));
            }
        }
        let col = assemble_load(&map, &layout, &f, &cfg).unwrap();
        let m = mass_matrix(&map, &layout).unwrap();
        assert!((col - m.column(k)).amax() < 1e-15);
        assert!(assemble_load(&map, &layout, &[1.0], &cfg).is_err());
    }

    #[test]
    fn constraint_rows_examples() {
        let (map, layout) = sphere(2);
        let rows = constraint_rows(&map, &layout).unwrap();
        let ones = DVector::from_element(layout.dof_count, 1.0);
        for r in &rows {
            assert!(r.dot(&ones).abs() < 1e-13);
        }
        // b = x_1 on the unit sphere: int x_1^2 ds = 4 pi / 3.
        let x1 = DVector::from_vec(layout.interpolate(|t, xi, eta| map.point(t, xi, eta).x));
        let v = rows[0].dot(&x1);
        assert!((v - 4.0 * core::f64::consts::PI / 3.0).abs() < 0.01 * 4.0 * core::f64::consts::PI / 3.0);
    }

    #[test]
    fn aux_columns_odd_under_reflection() {
        let (map, layout) = sphere(1);
        let cfg = QuadratureConfig::default();
        let s = -assemble_slp(&map, &layout, &cfg).unwrap();
        let (cols, _) = assemble_aux_and_constraints(&map, &layout, &s, AuxMode::Density).unwrap();
        let flipped = map.with_positions(map.positions.iter().map(|p| -p).collect()).unwrap();
        // The SLP matrix only depends on distances, so it is unchanged; A_j changes sign.
        let s2 = -assemble_slp(&flipped, &layout, &cfg).unwrap();
        assert!((&s2 - &s).amax() < 1e-12 * s.amax());
        let (cols2, _) = assemble_aux_and_constraints(&flipped, &layout, &s2, AuxMode::Density).unwrap();
        for k in 0..3 {
            assert!((&cols2[k] + &cols[k]).amax() < 1e-12 * cols[k].amax());
        }
    }

    #[test]
    fn galerkin_consistency() {
        let (map, layout) = sphere(1);
        let a = assemble_slp(&map, &layout, &QuadratureConfig::default()).unwrap();
        let b = assemble_slp(&map, &layout, &QuadratureConfig { order: 7, ..Default::default() }).unwrap();
        let rel = (&a - &b).amax() / a.amax();
        assert!(rel <= 1e-8, "{rel:e}");
    }

    #[test]
    fn discontinuous_spaces() {
        let m = build_icosphere(1).unwrap();
        let map = SurfaceMap::new(m.clone()).unwrap();
        for space in [Space::P0, Space::P1Disc] {
            let layout = DofLayout::new(&m, space);
            let s = assemble_slp(&map, &layout, &QuadratureConfig::default()).unwrap();
            assert!(s.clone().cholesky().is_some());
        }
    }
}

//! Benchmark reproductions: sphere recovery, cube Hessians, pointwise errors
//! of the linearized problem and the Laplace-Beltrami spectrum.

use molodensky_core::assembly::{assemble_aux_and_constraints, assemble_both, assemble_load, assemble_slp, ObliqueField, QuadratureConfig};
use molodensky_core::driver::{
    at_points, run, smoothed_g_increment, smoothed_w_increment, theta_schedule, ConvergenceReport, DriverConfig, GIncrements,
    ProblemData, ReportRow, Smoothing,
};
use molodensky_core::field::{fd_hessian, hessian_error, point_mass, DensityField, EvalSide, FdConfig};
use molodensky_core::mesh::{build_cube_surface, build_icosphere, SurfaceMap, TriangleFrame};
use molodensky_core::quadrature::regular_rule;
use molodensky_core::smoother::{assemble_laplace_beltrami, solve_eigenbasis, HeatSmoother, VectorSmoothing};
use molodensky_core::solvers::SaddlePointSolver;
use molodensky_core::space::{p2_dof_layout, DofLayout, Space};
use molodensky_core::{Error, Result, Vec3};

use crate::config::{RunConfig, Shape};

/// Model problem on the icosphere of the configured level.
pub fn recover_sphere(
    cfg: &RunConfig,
    on_row: impl FnMut(&ReportRow),
) -> std::result::Result<ConvergenceReport, (ConvergenceReport, Error)> {
    if cfg.shape != Shape::Icosphere {
        return Err((ConvergenceReport::default(), Error::InvalidArgument("sphere recovery needs shape=icosphere".into())));
    }
    let mesh = build_icosphere(cfg.level).map_err(|e| (ConvergenceReport::default(), e))?;
    let data = ProblemData::model(&mesh, cfg.driver.target_radius);
    run(mesh, data, &cfg.driver, on_row)
}

/// Evaluation point of the cube benchmark.
pub fn cube_point() -> Vec3 {
    Vec3::new(1.0, 1.0 / 3.0, 1.0 / 3.0)
}

fn cube_frame() -> TriangleFrame {
    TriangleFrame { normal: Vec3::x(), centroid: cube_point(), area: 1.0, t1: Vec3::y(), t2: Vec3::z() }
}

/// Hessian error at the cube point with the exact gradient of `1/|x|`.
pub fn analytic_hessian_floor(fd: &FdConfig) -> Result<f64> {
    let x = cube_point();
    let h = fd_hessian(|p| Ok(point_mass(p).1), &x, &cube_frame(), fd)?;
    Ok(hessian_error(&h.hessian, &point_mass(&x).2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianRow {
    pub p: usize,
    pub level: usize,
    pub dofs: usize,
    pub error: f64,
}

/// Exterior Dirichlet problem on the cube with data `1/|x|`, solved as
/// `V mu = u` in the given space; FD Hessian of `V mu` at the cube point.
pub fn cube_hessian(space: Space, level: usize, quad: &QuadratureConfig, fd: &FdConfig) -> Result<HessianRow> {
    let mesh = build_cube_surface(level)?;
    let layout = DofLayout::new(&mesh, space);
    let map = SurfaceMap::new(mesh)?;
    let slp = assemble_slp(&map, &layout, quad)?;
    let pts = molodensky_core::assembly::outer_points(&map, quad)?;
    let data: Vec<f64> = pts.iter().map(|p| 1.0 / p.norm()).collect();
    let load = assemble_load(&map, &layout, &data, quad)?;
    // Stored matrix is -<V b_j, b_i>.
    let chol = slp.cholesky().ok_or_else(|| Error::InvalidArgument("single layer matrix not positive definite".into()))?;
    let mu = -chol.solve(&load);
    let field = DensityField::new(&map, &layout, mu.as_slice())?;
    let x = cube_point();
    let on_face = |p: &Vec3| (p.x - 1.0).abs() < 1e-14;
    let grad = |p: &Vec3| {
        let side = if on_face(p) { EvalSide::Exterior } else { EvalSide::OffSurface };
        Ok(field.eval(p, side)?.g)
    };
    let h = fd_hessian(grad, &x, &cube_frame(), fd)?;
    Ok(HessianRow { p: space.degree(), level, dofs: layout.dof_count, error: hessian_error(&h.hessian, &point_mass(&x).2) })
}

/// P0, P1 (discontinuous) and P2 over cube levels `0..=max_level`.
pub fn hessian_bench(max_level: usize, quad: &QuadratureConfig, fd: &FdConfig) -> Result<Vec<HessianRow>> {
    let mut rows = Vec::new();
    for space in [Space::P0, Space::P1Disc, Space::P2] {
        for level in 0..=max_level {
            let row = cube_hessian(space, level, quad, fd)?;
            log::info!("hessian-bench p={} level={} dofs={} error={:.3e}", row.p, row.level, row.dofs, row.error);
            rows.push(row);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EocRow {
    pub iter: usize,
    pub level: usize,
    pub dofs: usize,
    pub dofs_disc_p2: usize,
    pub value: f64,
    pub exact: f64,
    pub error: f64,
    /// `log(e_{N-1}/e_N) / log 4`: order per degree of freedom.
    pub eoc: Option<f64>,
    /// `log(e_{N-1}/e_N) / log 2`: order in the mesh width.
    pub eoc_h: Option<f64>,
}

/// Evaluation point of the pointwise errors.
pub fn eoc_point() -> Vec3 {
    Vec3::new(0.0, 0.0, 2.0)
}

/// Data `F_m` of the model problem on the unit sphere for `m < iterations`,
/// with `G_m` frozen at `G_0`, in the continuum.
///
/// `W - W_0` is constant and `G - G_0 = c x` is radial, so both stay in
/// closed form under the heat smoother: constants are preserved and
/// degree-one components are damped by `exp(-2^s/theta)`.
pub fn model_linearized_data(cfg: &DriverConfig, iterations: usize) -> Result<Vec<f64>> {
    let dw = 1.0 / cfg.target_radius - 1.0;
    let c = 1.0 - 1.0 / (cfg.target_radius * cfg.target_radius);
    let damp = |theta: f64| match (cfg.smoother.enabled, cfg.smoother.vector_mode) {
        (true, VectorSmoothing::Componentwise) => (-(2f64.powf(cfg.smoother.exponent)) / theta).exp(),
        _ => 1.0,
    };
    let mut out = Vec::with_capacity(iterations);
    let (mut sum, mut prev) = (0.0, None::<f64>);
    for m in 0..iterations {
        let s = theta_schedule(cfg.theta0, cfg.kappa, m)?;
        let w_dot = if m == 0 { dw / s.delta } else { 0.0 };
        let r = c + sum;
        let before = match (s.previous_theta(), prev) {
            (Some(t), Some(p)) => damp(t) * p,
            _ => 0.0,
        };
        let g_dot = (damp(s.theta) * r - before) / s.delta;
        sum += g_dot * s.delta;
        prev = Some(r);
        // h = x/2 on the unit sphere.
        out.push(w_dot + 0.5 * g_dot);
    }
    Ok(out)
}

/// Linearized problems of the first `iterations` model steps on the unit
/// icosphere of each level, with `u_N(q)` against `u(q) = 2 F_m / |q|`.
pub fn eoc_table(max_level: usize, iterations: usize, cfg: &DriverConfig) -> Result<Vec<EocRow>> {
    let exact_f = model_linearized_data(cfg, iterations)?;
    let q = eoc_point();
    let quad = &cfg.quadrature;
    let mut values = vec![Vec::new(); iterations];
    let mut sizes = Vec::new();
    for level in 0..=max_level {
        let mesh = build_icosphere(level)?;
        let layout = p2_dof_layout(&mesh);
        let data = ProblemData::model(&mesh, cfg.target_radius);
        let map = SurfaceMap::new(mesh)?;
        let h = ObliqueField::from_vertex_values(&map, &data.h0)?;
        let (_, b) = assemble_both(&map, &layout, &h, quad)?;
        let (aux, rows) = assemble_aux_and_constraints(&map, &layout, &b, cfg.aux_mode)?;
        let solver = SaddlePointSolver::new(&b, &aux, &rows)?;
        let smoother = if cfg.smoother.enabled {
            Some(HeatSmoother::new(&map, cfg.smoother.modes, cfg.smoother.exponent, cfg.smoother.vector_mode)?)
        } else {
            None
        };
        let smoothing = Smoothing(smoother.as_ref());
        let np = regular_rule(quad.order)?.len();
        let dw: Vec<f64> = data.w.iter().zip(&data.w0).map(|(a, b)| a - b).collect();
        let mut inc = GIncrements::default();
        for (m, vals) in values.iter_mut().enumerate() {
            let s = theta_schedule(cfg.theta0, cfg.kappa, m)?;
            let w_dot = smoothed_w_increment(&s, smoothing, &dw)?;
            let g_dot = smoothed_g_increment(&s, smoothing, &mut inc, &data.g, &data.g0)?;
            let w_pts = at_points(&map, quad, &w_dot)?;
            let g_pts = at_points(&map, quad, &g_dot)?;
            let f: Vec<f64> = (0..w_pts.len()).map(|i| w_pts[i] + g_pts[i].dot(&h.h[i / np])).collect();
            let sol = solver.solve(&assemble_load(&map, &layout, &f, quad)?, cfg.aux_mode)?;
            let u = DensityField::from_solution(&map, &layout, &sol)?.eval(&q, EvalSide::OffSurface)?.u;
            log::info!("eoc-table iter={m} level={level} u(q)={u:.12e}");
            vals.push(u);
        }
        sizes.push((layout.dof_count, layout.discontinuous_p2_count()));
    }
    let mut out = Vec::new();
    for (m, vals) in values.iter().enumerate() {
        let exact = 2.0 * exact_f[m] / q.norm();
        let mut last: Option<f64> = None;
        for (level, &value) in vals.iter().enumerate() {
            let error = (value - exact).abs();
            let ratio = last.map(|e| (e / error).ln());
            out.push(EocRow {
                iter: m,
                level,
                dofs: sizes[level].0,
                dofs_disc_p2: sizes[level].1,
                value,
                exact,
                error,
                eoc: ratio.map(|r| r / 4f64.ln()),
                eoc_h: ratio.map(|r| r / 2f64.ln()),
            });
            last = Some(error);
        }
    }
    Ok(out)
}

/// Laplace-Beltrami eigenvalues `lambda_0..=lambda_modes` on the icosphere.
pub fn eigs(level: usize, modes: usize) -> Result<Vec<f64>> {
    let map = SurfaceMap::new(build_icosphere(level)?)?;
    let fem = assemble_laplace_beltrami(&map)?;
    Ok(solve_eigenbasis(&fem, modes)?.eigenvalues)
}

pub const HESSIAN_HEADER: &str = "p,level,dofs,error";
pub const EOC_HEADER: &str = "iter,level,dofs,dofs_disc_p2,u_q,u_exact,error,eoc,eoc_h";
pub const EIGS_HEADER: &str = "j,lambda_j";

pub fn hessian_line(r: &HessianRow) -> String {
    format!("{},{},{},{:.12e}", r.p, r.level, r.dofs, r.error)
}

pub fn eoc_line(r: &EocRow) -> String {
    let opt = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
    format!(
        "{},{},{},{},{:.12e},{:.12e},{:.12e},{},{}",
        r.iter,
        r.level,
        r.dofs,
        r.dofs_disc_p2,
        r.value,
        r.exact,
        r.error,
        opt(r.eoc),
        opt(r.eoc_h)
    )
}

pub fn eigs_line(j: usize, lambda: f64) -> String {
    format!("{j},{lambda:.12e}")
}

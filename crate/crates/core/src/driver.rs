//! Nash-Hormander iteration with heat-equation smoothing, with optional restarts.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::assembly::{assemble_both, assemble_load, map_indices, outer_points, AssembledSystem, AuxMode, ObliqueField, QuadratureConfig};
use crate::field::{gravity_frame, vertex_samples, DensityField, EvalSide, FdConfig, GravityFrame};
use crate::math::powf;
use crate::mesh::{SurfaceMap, TriangleMesh};
use crate::quadrature::regular_rule;
use crate::smoother::{assemble_laplace_beltrami, HeatSmoother, VectorSmoothing};
use crate::solvers::{accumulate_dirichlet_data, solve_dirichlet, solve_linearized, PotentialHistory};
use crate::space::{p2_dof_layout, DofLayout};
use crate::{Error, Result, Vec3};

pub use crate::mesh::radius_error;

/// `theta_m = (theta_0^kappa + m)^(1/kappa)` and `delta_m = theta_{m+1} - theta_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleState {
    pub theta0: f64,
    pub kappa: f64,
    pub m: usize,
    pub theta: f64,
    pub delta: f64,
}

impl ScheduleState {
    /// `theta_{m-1}`, if `m > 0`.
    pub fn previous_theta(&self) -> Option<f64> {
        (self.m > 0).then(|| theta_at(self.theta0, self.kappa, self.m - 1))
    }
}

fn theta_at(theta0: f64, kappa: f64, m: usize) -> f64 {
    powf(powf(theta0, kappa) + m as f64, 1.0 / kappa)
}

pub fn theta_schedule(theta0: f64, kappa: f64, m: usize) -> Result<ScheduleState> {
    if !(theta0 > 1.0 && theta0.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!("theta_0 = {theta0} must exceed 1")));
    }
    if !(kappa > 1.0 && kappa.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!("kappa = {kappa} must exceed 1")));
    }
    let theta = theta_at(theta0, kappa, m);
    let delta = theta_at(theta0, kappa, m + 1) - theta;
    Ok(ScheduleState { theta0, kappa, m, theta, delta })
}

/// `S_theta`, or the identity when smoothing is off.
#[derive(Debug, Clone, Copy)]
pub struct Smoothing<'a>(pub Option<&'a HeatSmoother>);

impl Smoothing<'_> {
    pub fn scalar(&self, f: &[f64], theta: f64) -> Result<Vec<f64>> {
        match self.0 {
            Some(s) => s.smooth(f, theta),
            None => Ok(f.to_vec()),
        }
    }

    pub fn vector(&self, f: &[Vec3], theta: f64) -> Result<Vec<Vec3>> {
        match self.0 {
            Some(s) => s.smooth_vectors(f, theta),
            None => Ok(f.to_vec()),
        }
    }
}

/// Smoothed potential increment; `dw = W - W_0` at the vertices.
///
/// `m = 0`: `S_theta0(dw / delta_0)`; otherwise
/// `(S_theta_m dw - S_theta_{m-1} dw) / delta_m`.
pub fn smoothed_w_increment(schedule: &ScheduleState, smoothing: Smoothing<'_>, dw: &[f64]) -> Result<Vec<f64>> {
    let now = smoothing.scalar(dw, schedule.theta)?;
    let prev = match schedule.previous_theta() {
        Some(t) => smoothing.scalar(dw, t)?,
        None => vec![0.0; dw.len()],
    };
    Ok(now.iter().zip(&prev).map(|(a, b)| (a - b) / schedule.delta).collect())
}

/// Running state of the gravity increments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GIncrements {
    /// `sum_{j<m} delta_j G~_j`.
    pub sum: Vec<Vec3>,
    /// `G - G_{m-1} + sum_{j<m-1} delta_j G~_j`, empty at `m = 0`.
    pub previous: Vec<Vec3>,
}

/// Smoothed gravity increment
/// `(S_theta_m R_m - S_theta_{m-1} R_{m-1}) / delta_m` with
/// `R_m = G - G_m + sum_{j<m} delta_j G~_j`; the running sum is updated.
pub fn smoothed_g_increment(
    schedule: &ScheduleState,
    smoothing: Smoothing<'_>,
    state: &mut GIncrements,
    g_data: &[Vec3],
    g_m: &[Vec3],
) -> Result<Vec<Vec3>> {
    let n = g_data.len();
    if g_m.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: g_m.len() });
    }
    if state.sum.is_empty() {
        state.sum = vec![Vec3::zeros(); n];
    }
    let residual: Vec<Vec3> = (0..n).map(|v| g_data[v] - g_m[v] + state.sum[v]).collect();
    let now = smoothing.vector(&residual, schedule.theta)?;
    let prev = match (schedule.previous_theta(), state.previous.is_empty()) {
        (Some(t), false) => smoothing.vector(&state.previous, t)?,
        _ => vec![Vec3::zeros(); n],
    };
    let out: Vec<Vec3> = now.iter().zip(&prev).map(|(a, b)| (a - b) / schedule.delta).collect();
    for (s, o) in state.sum.iter_mut().zip(&out) {
        *s += o * schedule.delta;
    }
    state.previous = residual;
    Ok(out)
}

/// How `G_{m+1}` is formed from the gravity frame of iteration `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GravityUpdate {
    /// `g_m` at the vertices of `phi_m`.
    Literal,
    /// Gravity of the potential of iteration `m` sampled at the vertices of
    /// `phi_{m+1}`.
    #[default]
    Transported,
}

/// Surface the smoother is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmoothingSurface {
    #[default]
    Current,
    Reference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmootherConfig {
    pub enabled: bool,
    /// Truncation index `M`; `None` keeps all modes.
    pub modes: Option<usize>,
    pub exponent: f64,
    pub vector_mode: VectorSmoothing,
    pub surface: SmoothingSurface,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        SmootherConfig {
            enabled: true,
            modes: None,
            exponent: 1.0,
            vector_mode: VectorSmoothing::default(),
            surface: SmoothingSurface::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriverConfig {
    pub theta0: f64,
    pub kappa: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Restart every `k` iterations.
    pub restart_every: Option<usize>,
    pub smoother: SmootherConfig,
    pub quadrature: QuadratureConfig,
    pub fd: FdConfig,
    pub aux_mode: AuxMode,
    pub gravity_update: GravityUpdate,
    /// Carry the accumulated potential along the surface motion.
    pub transport: bool,
    /// Radius used for the radius error column.
    pub target_radius: f64,
}

impl Default for DriverConfig {
    fn default() -> Self {
        DriverConfig {
            theta0: 2.6,
            kappa: 6.0,
            tol: 1e-3,
            max_iter: 30,
            restart_every: None,
            smoother: SmootherConfig::default(),
            quadrature: QuadratureConfig::default(),
            fd: FdConfig::default(),
            aux_mode: AuxMode::Density,
            gravity_update: GravityUpdate::default(),
            transport: true,
            target_radius: 1.1,
        }
    }
}

impl DriverConfig {
    pub fn validate(&self) -> Result<()> {
        theta_schedule(self.theta0, self.kappa, 0)?;
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if self.restart_every == Some(0) {
            return Err(Error::InvalidArgument("restart_every must be at least 1".into()));
        }
        if !(self.target_radius > 0.0) {
            return Err(Error::InvalidArgument("target radius must be positive".into()));
        }
        if !(self.smoother.exponent >= 1.0) {
            return Err(Error::InvalidArgument("smoothing exponent must be >= 1".into()));
        }
        self.fd.validate()
    }
}

/// Measured data on the reference sphere and the starting guess.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    pub w: Vec<f64>,
    pub g: Vec<Vec3>,
    pub w0: Vec<f64>,
    pub g0: Vec<Vec3>,
    /// Per-vertex starting direction, interpolated to facet midpoints.
    pub h0: Vec<Vec3>,
    pub phi0: Vec<Vec3>,
}

impl ProblemData {
    /// Field `1/|x|` seen from the sphere of radius `target`, starting on the
    /// reference surface with `W_0 = 1`, `G_0 = -x`, `h_0 = x/2`.
    pub fn model(reference: &TriangleMesh, target: f64) -> Self {
        let xs: Vec<Vec3> = reference.vertices.iter().map(|p| p.normalize()).collect();
        ProblemData {
            w: vec![1.0 / target; xs.len()],
            g: xs.iter().map(|x| -x / (target * target)).collect(),
            w0: vec![1.0; xs.len()],
            g0: xs.iter().map(|x| -x).collect(),
            h0: xs.iter().map(|x| x * 0.5).collect(),
            phi0: reference.vertices.clone(),
        }
    }

    fn check(&self, nv: usize) -> Result<()> {
        for len in [self.w.len(), self.g.len(), self.w0.len(), self.g0.len(), self.h0.len(), self.phi0.len()] {
            if len != nv {
                return Err(Error::SizeMismatch { expected: nv, got: len });
            }
        }
        Ok(())
    }
}

/// One logged iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub iter: usize,
    pub theta: f64,
    pub delta: f64,
    pub radius_mean: f64,
    pub radius_err: f64,
    pub res_g: f64,
    pub res_w: f64,
    /// Side constants of the linearized solve.
    pub a: [f64; 3],
    /// Side constants of the Dirichlet solve.
    pub a_dirichlet: [f64; 3],
    /// Total density of the Dirichlet solve (monopole moment).
    pub total_density: f64,
    /// Surface-L2 norm of `F_m` at the outer points.
    pub f_norm: f64,
    pub restart: usize,
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceReport {
    pub rows: Vec<ReportRow>,
    pub converged: bool,
    /// Radius statistics of the initial surface.
    pub initial_radius: (f64, f64),
    /// Radius statistics of the last surface update.
    pub final_radius: (f64, f64),
}

/// State carried between iterations.
#[derive(Debug, Clone)]
pub struct IterationState {
    pub map: SurfaceMap,
    pub reference: SurfaceMap,
    pub layout: DofLayout,
    pub data: ProblemData,
    /// `G_m` at the vertices.
    pub g_m: Vec<Vec3>,
    pub h_m: ObliqueField,
    pub increments: GIncrements,
    pub history: Option<PotentialHistory>,
    pub schedule: ScheduleState,
    /// Schedule index since the last restart.
    pub local_m: usize,
    pub restart: usize,
}

impl IterationState {
    pub fn new(reference: TriangleMesh, data: ProblemData, config: &DriverConfig) -> Result<Self> {
        config.validate()?;
        let nv = reference.vertices.len();
        data.check(nv)?;
        let layout = p2_dof_layout(&reference);
        let base = Arc::new(reference);
        let reference = SurfaceMap::from_shared(base)?;
        let map = reference.with_positions(data.phi0.clone())?;
        let h_m = ObliqueField::from_vertex_values(&map, &data.h0)?;
        Ok(IterationState {
            g_m: data.g0.clone(),
            h_m,
            map,
            reference,
            layout,
            data,
            increments: GIncrements::default(),
            history: None,
            schedule: theta_schedule(config.theta0, config.kappa, 0)?,
            local_m: 0,
            restart: 0,
        })
    }
}

/// Result of one step beyond the updated state.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub row: ReportRow,
    pub frame: GravityFrame,
    /// `phi_dot_m` at the vertices.
    pub phi_dot: Vec<Vec3>,
    /// Accumulated potential at the vertices of `phi_{m+1}`.
    pub w_next: Vec<f64>,
}

/// P1 interpolation of vertex values at the outer points, facet-major.
pub fn at_points<T>(map: &SurfaceMap, cfg: &QuadratureConfig, values: &[T]) -> Result<Vec<T>>
where
    T: Copy + core::ops::Mul<f64, Output = T> + core::ops::Add<Output = T>,
{
    let rule = regular_rule(cfg.order)?;
    let mut out = Vec::with_capacity(map.triangle_count() * rule.len());
    for tri in &map.base.triangles {
        for p in &rule.points {
            let l0 = 1.0 - p[0] - p[1];
            out.push(values[tri[0]] * l0 + values[tri[1]] * p[0] + values[tri[2]] * p[1]);
        }
    }
    Ok(out)
}

fn build_smoother(state: &IterationState, config: &DriverConfig) -> Result<Option<HeatSmoother>> {
    if !config.smoother.enabled {
        return Ok(None);
    }
    let surface = match config.smoother.surface {
        SmoothingSurface::Current => &state.map,
        SmoothingSurface::Reference => &state.reference,
    };
    HeatSmoother::new(surface, config.smoother.modes, config.smoother.exponent, config.smoother.vector_mode).map(Some)
}

fn step_inner(state: &mut IterationState, config: &DriverConfig) -> Result<StepOutput> {
    let start = now();
    let m = state.local_m;
    let sched = theta_schedule(config.theta0, config.kappa, m)?;
    state.schedule = sched;
    let cfg = &config.quadrature;
    let map = state.map.clone();
    let layout = &state.layout;

    // (b), (c) smoothed increments.
    let smoother = build_smoother(state, config)?;
    let smoothing = Smoothing(smoother.as_ref());
    let dw: Vec<f64> = state.data.w.iter().zip(&state.data.w0).map(|(a, b)| a - b).collect();
    let w_dot = smoothed_w_increment(&sched, smoothing, &dw)?;
    let g_dot = smoothed_g_increment(&sched, smoothing, &mut state.increments, &state.data.g, &state.g_m)?;

    // (d) linearized problem on phi_m.
    let (slp, b) = assemble_both(&map, layout, &state.h_m, cfg)?;
    let rule = regular_rule(cfg.order)?;
    if state.history.is_none() {
        let w0 = at_points(&map, cfg, &state.data.w0)?;
        let load = assemble_load(&map, layout, &w0, cfg)?;
        let sys = AssembledSystem::dirichlet(&map, layout, slp.clone(), load, config.aux_mode)?;
        let v0 = DensityField::from_solution(&map, layout, &solve_dirichlet(&sys)?)?;
        state.history = Some(PotentialHistory::new(v0.surface_values(&map, &rule)?));
    }
    let np = rule.len();
    let w_pts = at_points(&map, cfg, &w_dot)?;
    let g_pts = at_points(&map, cfg, &g_dot)?;
    let f_m: Vec<f64> = (0..w_pts.len()).map(|i| w_pts[i] + g_pts[i].dot(&state.h_m.h[i / np])).collect();
    let f_norm = surface_norm(&map, &rule, &f_m)?;
    if f_norm < 1e-12 {
        log::warn!("iteration {m}: |F_m| = {f_norm:e} is below 1e-12; data may be over-smoothed");
    }
    log::debug!("iteration {m}: |F_m| = {f_norm:e}");
    let load = assemble_load(&map, layout, &f_m, cfg)?;
    let sys = AssembledSystem::oblique(&map, layout, slp, b, load, config.aux_mode)?;
    let robin = solve_linearized(&sys)?;
    let u_m = DensityField::from_solution(&map, layout, &robin)?;

    // (e) accumulated data and the Dirichlet solve.
    let history = state.history.as_mut().expect("history initialized above");
    let u_pts = u_m.surface_values(&map, &rule)?;
    let w_m = accumulate_dirichlet_data(history, m, sched.delta, u_pts)?;
    let load = assemble_load(&map, layout, &w_m, cfg)?;
    let sys = AssembledSystem::dirichlet(&map, layout, sys.slp, load, config.aux_mode)?;
    let dir = solve_dirichlet(&sys)?;
    let v_m = DensityField::from_solution(&map, layout, &dir)?;
    let total_density = total_density(&map, layout, dir.mu.as_slice())?;

    // (f) gravity frame; (g) surface update.
    let frame = gravity_frame(&[&v_m], &map, &config.fd)?;
    let grad_u: Vec<Vec3> = vertex_samples(&[&u_m], &map, &config.fd, false)?.into_iter().map(|s| s.g).collect();
    let rhs: Vec<Vec3> = g_dot.iter().zip(&grad_u).map(|(a, b)| a - b).collect();
    let phi_dot = frame.solve(&rhs)?;
    let next = crate::mesh::update_vertices(&map, &phi_dot, sched.delta)?;
    let moved: Vec<Vec3> = next.positions.iter().zip(&map.positions).map(|(a, b)| a - b).collect();

    // Potential and gravity of v_m carried to phi_{m+1}: sampled directly when
    // the new samples lie outside the old body, else by Taylor steps.
    let carried: Option<Vec<(f64, Vec3)>> = match vertex_samples(&[&v_m], &next, &config.fd, false) {
        Ok(s) => Some(s.into_iter().map(|s| (s.u, s.g)).collect()),
        Err(Error::InsideBody) => {
            log::warn!("iteration {m}: new surface samples inside the old body; using Taylor transport");
            None
        }
        Err(e) => return Err(e),
    };
    let carried = carried.unwrap_or_else(|| {
        (0..moved.len())
            .map(|v| {
                let (d, h) = (&moved[v], &frame.grad_g[v]);
                (frame.u[v] + frame.g[v].dot(d) + 0.5 * d.dot(&(h * d)), frame.g[v] + h * d)
            })
            .collect()
    });
    let w_next: Vec<f64> = if config.transport { carried.iter().map(|c| c.0).collect() } else { frame.u.clone() };
    if config.transport {
        let change = point_transport(&v_m, &map, &next, &frame, cfg)?;
        history.push_transport(change)?;
    } else {
        history.push_transport(vec![0.0; history.point_count()])?;
    }

    // (h) direction field and gravity for the next step.
    let h_next = frame.oblique_directions()?;
    state.h_m = ObliqueField::from_vertex_values(&next, &h_next)?;
    state.g_m = match config.gravity_update {
        GravityUpdate::Literal => frame.g.clone(),
        GravityUpdate::Transported => carried.iter().map(|c| c.1).collect(),
    };

    // (i) residuals on phi_m.
    let fem = assemble_laplace_beltrami(&map)?;
    let dg: Vec<Vec3> = frame.g.iter().zip(&state.data.g).map(|(a, b)| a - b).collect();
    let dv: Vec<f64> = frame.u.iter().zip(&state.data.w).map(|(a, b)| a - b).collect();
    let (radius_mean, radius_err) = radius_error(&next, config.target_radius);
    let row = ReportRow {
        iter: 0,
        theta: sched.theta,
        delta: sched.delta,
        radius_mean,
        radius_err,
        res_g: fem.mass_norm_vec(&dg),
        res_w: fem.mass_norm(&dv),
        a: robin.a,
        a_dirichlet: dir.a,
        total_density,
        f_norm,
        restart: state.restart,
        wall_s: now() - start,
    };
    state.map = next;
    state.local_m += 1;
    Ok(StepOutput { row, frame, phi_dot, w_next })
}

/// `v(phi_{m+1}) - v(phi_m)` at the outer points. Points that moved outward
/// are evaluated directly; the others take a second-order Taylor step with
/// the interpolated gravity frame.
fn point_transport(v: &DensityField, map: &SurfaceMap, next: &SurfaceMap, frame: &GravityFrame, cfg: &QuadratureConfig) -> Result<Vec<f64>> {
    let old = outer_points(map, cfg)?;
    let new = outer_points(next, cfg)?;
    let g = at_points(map, cfg, &frame.g)?;
    let h = at_points(map, cfg, &frame.grad_g)?;
    let frames = map.frames()?;
    let np = old.len() / map.triangle_count();
    let out = map_indices(old.len(), |i| {
        let d = new[i] - old[i];
        let taylor = g[i].dot(&d) + 0.5 * d.dot(&(h[i] * d));
        if d.dot(&frames[i / np].normal) <= 0.0 {
            return Ok(taylor);
        }
        let before = v.eval_unchecked(&old[i], EvalSide::Exterior)?.u;
        match v.eval(&new[i], EvalSide::OffSurface) {
            Ok(after) => Ok(after.u - before),
            Err(Error::InsideBody | Error::OnPanel | Error::EdgeSingularity) => Ok(taylor),
            Err(e) => Err(e),
        }
    });
    out.into_iter().collect()
}

/// Steps (a)-(h) of one iteration; errors carry the iteration index.
pub fn nash_hormander_step(state: &mut IterationState, config: &DriverConfig) -> Result<StepOutput> {
    let m = state.local_m;
    step_inner(state, config).map_err(|e| e.at_iteration(m))
}

/// Restart: the current state becomes the starting data.
pub fn restart(state: &mut IterationState, step: &StepOutput) -> Result<()> {
    state.data.w0 = step.w_next.clone();
    state.data.g0 = state.g_m.clone();
    state.data.phi0 = state.map.positions.clone();
    state.increments = GIncrements::default();
    state.history = state.history.as_ref().map(PotentialHistory::rebase);
    state.local_m = 0;
    state.restart += 1;
    Ok(())
}

/// Iterates until `res_G + res_W < tol` or `max_iter`.
///
/// On error the rows logged so far are returned with it.
pub fn run(
    reference: TriangleMesh,
    data: ProblemData,
    config: &DriverConfig,
    mut on_row: impl FnMut(&ReportRow),
) -> core::result::Result<ConvergenceReport, (ConvergenceReport, Error)> {
    let mut report = ConvergenceReport::default();
    let mut state = match IterationState::new(reference, data, config) {
        Ok(s) => s,
        Err(e) => return Err((report, e)),
    };
    report.initial_radius = radius_error(&state.map, config.target_radius);
    report.final_radius = report.initial_radius;
    for iter in 0..config.max_iter {
        let out = match nash_hormander_step(&mut state, config) {
            Ok(o) => o,
            Err(e) => return Err((report, e)),
        };
        let mut row = out.row.clone();
        row.iter = iter;
        log::info!(
            "iter {iter}: theta {:.6} radius {:.6} err {:.3e} res_G {:.3e} res_W {:.3e}",
            row.theta,
            row.radius_mean,
            row.radius_err,
            row.res_g,
            row.res_w
        );
        on_row(&row);
        report.final_radius = (row.radius_mean, row.radius_err);
        let done = row.res_g + row.res_w < config.tol;
        report.rows.push(row);
        if done {
            report.converged = true;
            break;
        }
        if let Some(k) = config.restart_every {
            if state.local_m == k {
                if let Err(e) = restart(&mut state, &out) {
                    return Err((report, e));
                }
            }
        }
    }
    Ok(report)
}

/// `int mu ds` over the surface.
pub fn total_density(map: &SurfaceMap, layout: &DofLayout, mu: &[f64]) -> Result<f64> {
    let rule = regular_rule(4)?;
    let mut s = 0.0;
    for t in 0..map.triangle_count() {
        let area = map.frame(t)?.area;
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            s += w * 2.0 * area * layout.evaluate(mu, t, p[0], p[1]);
        }
    }
    Ok(s)
}

fn surface_norm(map: &SurfaceMap, rule: &crate::quadrature::QuadratureRule, values: &[f64]) -> Result<f64> {
    let np = rule.len();
    let mut s = 0.0;
    for t in 0..map.triangle_count() {
        let area = map.frame(t)?.area;
        for (q, w) in rule.weights.iter().enumerate() {
            s += w * 2.0 * area * values[t * np + q].powi(2);
        }
    }
    Ok(s.sqrt())
}

#[cfg(feature = "std")]
fn now() -> f64 {
    use std::sync::OnceLock;
    use std::time::Instant;
    static START: OnceLock<Instant> = OnceLock::new();
    START.get_or_init(Instant::now).elapsed().as_secs_f64()
}

#[cfg(not(feature = "std"))]
fn now() -> f64 {
    0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_icosphere;

    #[test]
    fn schedule_values() {
        let s = theta_schedule(2.6, 6.0, 0).unwrap();
        assert_eq!(s.theta, 2.6);
        let s1 = theta_schedule(2.6, 6.0, 1).unwrap();
        assert!((s1.theta - (2.6f64.powi(6) + 1.0).powf(1.0 / 6.0)).abs() < 1e-15);
        assert!((s1.theta - 2.60140).abs() < 5e-6);
        let mut prev = f64::INFINITY;
        for m in 0..=100 {
            let s = theta_schedule(2.6, 6.0, m).unwrap();
            assert!(s.delta > 0.0 && s.delta < prev);
            prev = s.delta;
            assert!((s.theta.powf(6.0) - 2.6f64.powi(6) - m as f64).abs() < 1e-9);
        }
        assert!(theta_schedule(1.0, 6.0, 0).is_err());
        assert!(theta_schedule(2.6, 1.0, 0).is_err());
    }

    fn smoother() -> (SurfaceMap, HeatSmoother) {
        let map = SurfaceMap::new(build_icosphere(1).unwrap()).unwrap();
        let s = HeatSmoother::new(&map, None, 1.0, VectorSmoothing::Componentwise).unwrap();
        (map, s)
    }

    #[test]
    fn w_increments_telescope() {
        let (map, s) = smoother();
        let dw: Vec<f64> = map.positions.iter().map(|p| p.x * p.z - 0.3 * p.y + 0.1).collect();
        let mut sum = vec![0.0; dw.len()];
        for m in 0..=5 {
            let sched = theta_schedule(2.6, 6.0, m).unwrap();
            let inc = smoothed_w_increment(&sched, Smoothing(Some(&s)), &dw).unwrap();
            for (a, b) in sum.iter_mut().zip(inc) {
                *a += sched.delta * b;
            }
        }
        let expected = s.smooth(&dw, theta_schedule(2.6, 6.0, 5).unwrap().theta).unwrap();
        for (a, b) in sum.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let zero = smoothed_w_increment(&theta_schedule(2.6, 6.0, 3).unwrap(), Smoothing(Some(&s)), &vec![0.0; dw.len()]).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
        let c = smoothed_w_increment(&theta_schedule(2.6, 6.0, 0).unwrap(), Smoothing(Some(&s)), &vec![1.0 / 1.1 - 1.0; dw.len()]).unwrap();
        let d0 = theta_schedule(2.6, 6.0, 0).unwrap().delta;
        assert!(c.iter().all(|v| (v - (1.0 / 1.1 - 1.0) / d0).abs() < 1e-9 / d0));
    }

    #[test]
    fn g_increments_telescope_with_fixed_g_m() {
        let (map, s) = smoother();
        let g: Vec<Vec3> = map.positions.iter().map(|p| Vec3::new(p.y, p.z * p.x, 1.0)).collect();
        let g0: Vec<Vec3> = map.positions.iter().map(|p| -p).collect();
        let mut st = GIncrements::default();
        let first = smoothed_g_increment(&theta_schedule(2.6, 6.0, 0).unwrap(), Smoothing(Some(&s)), &mut st.clone(), &g, &g0).unwrap();
        let d0 = theta_schedule(2.6, 6.0, 0).unwrap().delta;
        let direct = s.smooth_vectors(&g.iter().zip(&g0).map(|(a, b)| (a - b) / d0).collect::<Vec<_>>(), 2.6).unwrap();
        for (a, b) in first.iter().zip(&direct) {
            assert!((a - b).norm() < 1e-9);
        }
        // With G_m following the increments exactly, the sum is S_theta_m (G - G_0).
        let mut g_m = g0.clone();
        for m in 0..=5 {
            let sched = theta_schedule(2.6, 6.0, m).unwrap();
            smoothed_g_increment(&sched, Smoothing(Some(&s)), &mut st, &g, &g_m).unwrap();
            g_m = g0.iter().zip(&st.sum).map(|(a, b)| a + b).collect();
        }
        let dg: Vec<Vec3> = g.iter().zip(&g0).map(|(a, b)| a - b).collect();
        let expected = s.smooth_vectors(&dg, theta_schedule(2.6, 6.0, 5).unwrap().theta).unwrap();
        for (a, b) in st.sum.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-12);
        }
        let mut empty = GIncrements::default();
        let z = smoothed_g_increment(&theta_schedule(2.6, 6.0, 0).unwrap(), Smoothing(Some(&s)), &mut empty, &g, &g).unwrap();
        assert!(z.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn model_g_increment_contracts() {
        let (map, s) = smoother();
        let fem = &s.fem;
        let g: Vec<Vec3> = map.positions.iter().map(|p| -p.normalize() / 1.21).collect();
        let g0: Vec<Vec3> = map.positions.iter().map(|p| -p.normalize()).collect();
        let sched = theta_schedule(2.6, 6.0, 0).unwrap();
        for mode in [VectorSmoothing::Componentwise, VectorSmoothing::NormalTangential] {
            let s = HeatSmoother { vector_mode: mode, ..s.clone() };
            let out = smoothed_g_increment(&sched, Smoothing(Some(&s)), &mut GIncrements::default(), &g, &g0).unwrap();
            let input: Vec<Vec3> = g.iter().zip(&g0).map(|(a, b)| (a - b) / sched.delta).collect();
            assert!(fem.mass_norm_vec(&out) <= fem.mass_norm_vec(&input) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn radius_error_examples() {
        let map = SurfaceMap::new(build_icosphere(2).unwrap()).unwrap();
        let (mean, err) = radius_error(&map, 1.1);
        assert!((mean - 1.0).abs() < 1e-12);
        assert!((err - 0.1 / 162f64.sqrt()).abs() < 1e-12);
        assert!((err - 7.857e-3).abs() < 1e-6);
        let scaled = map.with_positions(map.positions.iter().map(|p| p * 1.1).collect()).unwrap();
        let (m2, e2) = radius_error(&scaled, 1.1);
        assert!((m2 - 1.1).abs() < 1e-12 && e2 < 1e-12);
    }
}

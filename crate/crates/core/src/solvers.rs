//! Saddle-point solves for the oblique and Dirichlet problems, and the
//! bookkeeping of the accumulated Dirichlet data.
//!
//! Both problems share the block form
//!
//! ```text
//! [ Op  C ] [mu]   [load]
//! [ R   0 ] [a ] = [ 0  ]
//! ```
//!
//! with `C` the three aux columns and `R` the constraint rows `<b_i, A_k>`.
//! `Op` is taken with the negative kernel: `B` for the oblique problem and
//! `-slp` (that is `V`) for the Dirichlet problem.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::assembly::{assemble_aux_and_constraints, AssembledSystem, AuxMode};
use crate::mesh::SurfaceMap;
use crate::space::DofLayout;
use crate::{Error, Result};

/// Condition estimates above this abort the solve.
pub const MAX_CONDITION: f64 = 1e12;
/// Normwise backward error accepted after the solve.
pub const MAX_RESIDUAL: f64 = 1e-9;

impl AssembledSystem {
    /// Dirichlet system for the stored single layer matrix `slp`.
    pub fn dirichlet(map: &SurfaceMap, layout: &DofLayout, slp: DMatrix<f64>, load: DVector<f64>, mode: AuxMode) -> Result<Self> {
        check_len(layout.dof_count, load.len())?;
        let v = -&slp;
        let (aux_columns, constraint_rows) = assemble_aux_and_constraints(map, layout, &v, mode)?;
        Ok(AssembledSystem { slp, oblique: None, aux_columns, constraint_rows, load, aux_mode: mode })
    }

    /// Oblique system; `slp` is kept so the Dirichlet solve on the same surface can reuse it.
    pub fn oblique(
        map: &SurfaceMap,
        layout: &DofLayout,
        slp: DMatrix<f64>,
        oblique: DMatrix<f64>,
        load: DVector<f64>,
        mode: AuxMode,
    ) -> Result<Self> {
        check_len(layout.dof_count, load.len())?;
        let (aux_columns, constraint_rows) = assemble_aux_and_constraints(map, layout, &oblique, mode)?;
        Ok(AssembledSystem { slp, oblique: Some(oblique), aux_columns, constraint_rows, load, aux_mode: mode })
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::SizeMismatch { expected, got });
    }
    Ok(())
}

/// Density and side constants of a solved saddle-point system.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSolution {
    pub mu: DVector<f64>,
    pub a: [f64; 3],
    /// 1-norm condition estimate of the equilibrated block matrix.
    pub condition: f64,
    /// Normwise backward error of the block solve.
    pub residual: f64,
    /// `max_k |<mu, A_k>|`.
    pub constraint_residual: f64,
    pub aux_mode: AuxMode,
}

/// Solution of the linearized (oblique) problem.
pub type RobinSolution = SaddleSolution;
/// Solution of the exterior Dirichlet problem.
pub type DirichletSolution = SaddleSolution;

/// LU factorization of the equilibrated block matrix.
#[derive(Debug, Clone)]
pub struct SaddlePointSolver {
    matrix: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rows: [DVector<f64>; 3],
    col_scale: [f64; 3],
    condition: f64,
    n: usize,
}

impl SaddlePointSolver {
    pub fn new(op: &DMatrix<f64>, aux: &[DVector<f64>; 3], rows: &[DVector<f64>; 3]) -> Result<Self> {
        let n = op.nrows();
        if op.ncols() != n {
            return Err(Error::SizeMismatch { expected: n, got: op.ncols() });
        }
        for v in aux.iter().chain(rows.iter()) {
            check_len(n, v.len())?;
        }
        let scale = op.amax();
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::IllConditioned { iteration: 0, estimate: f64::INFINITY });
        }
        let mut k = DMatrix::zeros(n + 3, n + 3);
        k.view_mut((0, 0), (n, n)).copy_from(op);
        let mut col_scale = [1.0; 3];
        for j in 0..3 {
            let c = aux[j].amax();
            col_scale[j] = if c > 0.0 { scale / c } else { 1.0 };
            let r = rows[j].amax();
            let row_scale = if r > 0.0 { scale / r } else { 1.0 };
            for i in 0..n {
                k[(i, n + j)] = aux[j][i] * col_scale[j];
                k[(n + j, i)] = rows[j][i] * row_scale;
            }
        }
        let lu = k.clone().lu();
        let mut s = SaddlePointSolver { matrix: k, lu, rows: rows.clone(), col_scale, condition: 0.0, n };
        let inv = s.inverse_norm1_estimate().ok_or(Error::IllConditioned { iteration: 0, estimate: f64::INFINITY })?;
        let cond = norm1(&s.matrix) * inv;
        if !(cond <= MAX_CONDITION) {
            return Err(Error::IllConditioned { iteration: 0, estimate: cond });
        }
        s.condition = cond;
        Ok(s)
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, load: &DVector<f64>, mode: AuxMode) -> Result<SaddleSolution> {
        let n = self.n;
        check_len(n, load.len())?;
        let mut rhs = DVector::zeros(n + 3);
        rhs.rows_mut(0, n).copy_from(load);
        let x = self.lu.solve(&rhs).ok_or(Error::IllConditioned { iteration: 0, estimate: f64::INFINITY })?;
        let r = &self.matrix * &x - &rhs;
        let denom = norm_inf(&self.matrix) * x.amax() + rhs.amax();
        let residual = if denom > 0.0 { r.amax() / denom } else { 0.0 };
        if !(residual <= MAX_RESIDUAL) {
            return Err(Error::Residual { iteration: 0, residual });
        }
        let mu = x.rows(0, n).into_owned();
        let a = [x[n] * self.col_scale[0], x[n + 1] * self.col_scale[1], x[n + 2] * self.col_scale[2]];
        let constraint_residual = self.rows.iter().map(|row| row.dot(&mu).abs()).fold(0.0, f64::max);
        Ok(SaddleSolution { mu, a, condition: self.condition, residual, constraint_residual, aux_mode: mode })
    }

    /// `x` with `K^T x = b`, from the factors of `P K = L U`.
    fn solve_transpose(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        let u = self.lu.u();
        let l = self.lu.l();
        let w = u.tr_solve_upper_triangular(b)?;
        let mut v = l.tr_solve_lower_triangular(&w)?;
        self.lu.p().inv_permute_rows(&mut v);
        Some(v)
    }

    /// Hager-Higham estimate of `||K^-1||_1`.
    fn inverse_norm1_estimate(&self) -> Option<f64> {
        let m = self.n + 3;
        let mut x = DVector::from_element(m, 1.0 / m as f64);
        let mut est = 0.0;
        let mut last = usize::MAX;
        for _ in 0..5 {
            let y = self.lu.solve(&x)?;
            est = y.lp_norm(1);
            let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
            let z = self.solve_transpose(&xi)?;
            let j = z.iamax();
            if z[j].abs() <= z.dot(&x) || j == last {
                break;
            }
            x = DVector::zeros(m);
            x[j] = 1.0;
            last = j;
        }
        let alt = DVector::from_fn(m, |i, _| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            s * (1.0 + i as f64 / (m - 1).max(1) as f64)
        });
        let y = self.lu.solve(&alt)?;
        let est2 = 2.0 * y.lp_norm(1) / (3.0 * m as f64);
        let e = if est2 > est { est2 } else { est };
        if e.is_finite() {
            Some(e)
        } else {
            None
        }
    }
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max)
}

fn norm_inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.lp_norm(1)).fold(0.0, f64::max)
}

/// Solves `<B mu, psi> + sum_j a_j <C_j, psi> = <F, psi>`, `<mu, A_k> = 0`.
pub fn solve_linearized(system: &AssembledSystem) -> Result<RobinSolution> {
    let b = system
        .oblique
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("system has no oblique operator".into()))?;
    SaddlePointSolver::new(b, &system.aux_columns, &system.constraint_rows)?.solve(&system.load, system.aux_mode)
}

/// Solves `<V mu, xi> + sum_j a_j <C_j, xi> = <w, xi>`, `<mu, A_k> = 0`.
///
/// Uses the system's aux columns, which must have been built for `V`
/// (see [`AssembledSystem::dirichlet`]).
pub fn solve_dirichlet(system: &AssembledSystem) -> Result<DirichletSolution> {
    let v = -&system.slp;
    SaddlePointSolver::new(&v, &system.aux_columns, &system.constraint_rows)?.solve(&system.load, system.aux_mode)
}

/// Values of past potentials at the standard outer points.
///
/// Points are identified across surfaces by facet index and rule point, so
/// the same entry serves every later surface. Entries are written once.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialHistory {
    v0: Vec<f64>,
    /// `(step, values)` of `u_i` on `phi_i`.
    entries: Vec<(f64, Vec<f64>)>,
    /// Potential change from moving the points of `phi_i` to `phi_{i+1}`.
    transport: Vec<Vec<f64>>,
    /// `v0 + sum_i step_i u_i + sum_i transport_i`.
    sum: Vec<f64>,
}

impl PotentialHistory {
    pub fn new(v0: Vec<f64>) -> Self {
        let sum = v0.clone();
        PotentialHistory { v0, entries: Vec::new(), transport: Vec::new(), sum }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn point_count(&self) -> usize {
        self.v0.len()
    }

    pub fn v0(&self) -> &[f64] {
        &self.v0
    }

    pub fn entry(&self, i: usize) -> Result<(f64, &[f64])> {
        self.entries.get(i).map(|(s, v)| (*s, v.as_slice())).ok_or(Error::MissingHistory(i))
    }

    pub fn transport(&self, i: usize) -> Result<&[f64]> {
        self.transport.get(i).map(|v| v.as_slice()).ok_or(Error::MissingHistory(i))
    }

    /// Accumulated data `W_{m-1}` at the points (after the last entry and transport).
    pub fn accumulated(&self) -> &[f64] {
        &self.sum
    }

    /// Records the potential change between `phi_i` and `phi_{i+1}` for the
    /// last entry `i`.
    pub fn push_transport(&mut self, values: Vec<f64>) -> Result<()> {
        check_len(self.v0.len(), values.len())?;
        if self.transport.len() + 1 != self.entries.len() {
            return Err(Error::MissingHistory(self.transport.len()));
        }
        for (s, v) in self.sum.iter_mut().zip(&values) {
            *s += v;
        }
        self.transport.push(values);
        Ok(())
    }

    /// Starts over from the accumulated values (restart).
    pub fn rebase(&self) -> PotentialHistory {
        PotentialHistory::new(self.sum.clone())
    }
}

/// `w_m = v0 + sum_{i<m} (step_i u_i + transport_i) + step_m u_m` at the points.
///
/// `values` are `u_m` at the points of the current surface; they are stored
/// as entry `m`. The cost does not grow with `m`.
pub fn accumulate_dirichlet_data(history: &mut PotentialHistory, m: usize, step: f64, values: Vec<f64>) -> Result<Vec<f64>> {
    check_len(history.v0.len(), values.len())?;
    if history.entries.len() != m {
        return Err(Error::MissingHistory(history.entries.len().min(m)));
    }
    if m > 0 && history.transport.len() != m {
        return Err(Error::MissingHistory(history.transport.len()));
    }
    for (s, v) in history.sum.iter_mut().zip(&values) {
        *s += step * v;
    }
    history.entries.push((step, values));
    Ok(history.sum.clone())
}

/// Per-coefficient values of a solution for reporting: `mu` with `a` appended.
pub fn flatten(solution: &SaddleSolution) -> Vec<f64> {
    let mut out = vec![0.0; solution.mu.len() + 3];
    out[..solution.mu.len()].copy_from_slice(solution.mu.as_slice());
    out[solution.mu.len()..].copy_from_slice(&solution.a);
    out
}

//! Heat-semigroup smoothing with the P1 Laplace-Beltrami operator.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::math::exp;
use crate::mesh::SurfaceMap;
use crate::{Error, Result, Vec3};

/// Dense P1 stiffness `C` and consistent mass `A` over the vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceBeltramiFem {
    pub stiffness: DMatrix<f64>,
    pub mass: DMatrix<f64>,
}

impl LaplaceBeltramiFem {
    pub fn vertex_count(&self) -> usize {
        self.mass.nrows()
    }

    /// `sqrt(f^T A f)`.
    pub fn mass_norm(&self, f: &[f64]) -> f64 {
        let v = DVector::from_column_slice(f);
        (v.transpose() * &self.mass * &v)[(0, 0)].max(0.0).sqrt()
    }

    /// Mass norm of a vertex vector field (sum over components).
    pub fn mass_norm_vec(&self, f: &[Vec3]) -> f64 {
        let mut sq = 0.0;
        for k in 0..3 {
            let c: Vec<f64> = f.iter().map(|v| v[k]).collect();
            sq += self.mass_norm(&c).powi(2);
        }
        sq.sqrt()
    }
}

/// Cotangent stiffness and consistent mass on the flat facets of `map`.
pub fn assemble_laplace_beltrami(map: &SurfaceMap) -> Result<LaplaceBeltramiFem> {
    let nv = map.vertex_count();
    let mut c = DMatrix::zeros(nv, nv);
    let mut a = DMatrix::zeros(nv, nv);
    for (t, tri) in map.base.triangles.iter().enumerate() {
        let area = map.frame(t)?.area;
        let p = map.triangle_points(t);
        // Edge opposite vertex i; grad phi_i = n x e_i / (2 area).
        let e = [p[2] - p[1], p[0] - p[2], p[1] - p[0]];
        for i in 0..3 {
            for j in 0..3 {
                c[(tri[i], tri[j])] += e[i].dot(&e[j]) / (4.0 * area);
                a[(tri[i], tri[j])] += area / if i == j { 6.0 } else { 12.0 };
            }
        }
    }
    Ok(LaplaceBeltramiFem { stiffness: c, mass: a })
}

/// Smallest generalized eigenpairs of `C psi = lambda A psi`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// A-orthonormal columns.
    pub vectors: DMatrix<f64>,
}

impl EigenBasis {
    pub fn mode_count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn mode(&self, j: usize) -> Vec<f64> {
        self.vectors.column(j).iter().copied().collect()
    }
}

/// Modes `0..=m` via Cholesky reduction `L^-1 C L^-T`.
pub fn solve_eigenbasis(fem: &LaplaceBeltramiFem, m: usize) -> Result<EigenBasis> {
    let nv = fem.vertex_count();
    if m >= nv {
        return Err(Error::InvalidArgument(alloc::format!("truncation {m} must be below the vertex count {nv}")));
    }
    let chol = fem.mass.clone().cholesky().ok_or(Error::MassFactorization)?;
    let l = chol.l();
    let lc = l.solve_lower_triangular(&fem.stiffness).ok_or(Error::MassFactorization)?;
    let reduced = l.solve_lower_triangular(&lc.transpose()).ok_or(Error::MassFactorization)?;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(reduced);
    let mut order: Vec<usize> = (0..nv).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let order = &order[..=m];
    let y = DMatrix::from_fn(nv, m + 1, |r, c| eig.eigenvectors[(r, order[c])]);
    let mut vectors = l.transpose().solve_upper_triangular(&y).ok_or(Error::MassFactorization)?;
    // Fix signs so the largest entry of each mode is positive.
    for mut col in vectors.column_iter_mut() {
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    Ok(EigenBasis { eigenvalues, vectors })
}

/// How vector fields are smoothed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VectorSmoothing {
    /// Cartesian components independently.
    Componentwise,
    /// Normal component as a scalar, tangential part componentwise and
    /// projected back onto the tangent planes.
    #[default]
    NormalTangential,
}

/// `S_theta` on a fixed surface.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatSmoother {
    pub fem: LaplaceBeltramiFem,
    pub basis: EigenBasis,
    /// Exponent `s` in `exp(-lambda^s t)`.
    pub exponent: f64,
    pub vector_mode: VectorSmoothing,
    /// Vertex normals used by [`VectorSmoothing::NormalTangential`].
    pub normals: Vec<Vec3>,
}

impl HeatSmoother {
    /// Assembles and diagonalizes on `map`; `modes = None` keeps the full basis.
    pub fn new(map: &SurfaceMap, modes: Option<usize>, exponent: f64, vector_mode: VectorSmoothing) -> Result<Self> {
        if !(exponent >= 1.0) {
            return Err(Error::InvalidArgument(alloc::format!("smoothing exponent {exponent} must be >= 1")));
        }
        let fem = assemble_laplace_beltrami(map)?;
        let m = modes.unwrap_or(fem.vertex_count() - 1);
        let basis = solve_eigenbasis(&fem, m)?;
        Ok(HeatSmoother { fem, basis, exponent, vector_mode, normals: map.vertex_normals() })
    }

    fn damping(&self, t: f64) -> Vec<f64> {
        self.basis
            .eigenvalues
            .iter()
            .map(|&l| {
                let l = l.max(0.0);
                let l = if self.exponent == 1.0 { l } else { crate::math::powf(l, self.exponent) };
                exp(-l * t)
            })
            .collect()
    }

    /// Fourier coefficients `beta_j = psi_j^T A f`.
    pub fn coefficients(&self, f: &[f64]) -> Result<DVector<f64>> {
        let nv = self.fem.vertex_count();
        if f.len() != nv {
            return Err(Error::SizeMismatch { expected: nv, got: f.len() });
        }
        let af = &self.fem.mass * DVector::from_column_slice(f);
        Ok(self.basis.vectors.tr_mul(&af))
    }

    /// Heat flow to time `t`: `sum_j exp(-lambda_j t) beta_j psi_j`.
    pub fn smooth_time(&self, f: &[f64], t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("time {t} must be non-negative")));
        }
        let mut beta = self.coefficients(f)?;
        for (b, d) in beta.iter_mut().zip(self.damping(t)) {
            *b *= d;
        }
        Ok((&self.basis.vectors * beta).iter().copied().collect())
    }

    /// `S_theta f`, i.e. the heat flow to `t = 1/theta`.
    pub fn smooth(&self, f: &[f64], theta: f64) -> Result<Vec<f64>> {
        if !(theta > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("theta {theta} must be positive")));
        }
        self.smooth_time(f, 1.0 / theta)
    }

    /// `S_theta` on a vertex vector field, per [`VectorSmoothing`].
    pub fn smooth_vectors(&self, f: &[Vec3], theta: f64) -> Result<Vec<Vec3>> {
        let nv = self.fem.vertex_count();
        if f.len() != nv {
            return Err(Error::SizeMismatch { expected: nv, got: f.len() });
        }
        let components = |f: &[Vec3]| -> Result<Vec<Vec3>> {
            let mut out = vec![Vec3::zeros(); nv];
            for k in 0..3 {
                let c: Vec<f64> = f.iter().map(|v| v[k]).collect();
                for (o, s) in out.iter_mut().zip(self.smooth(&c, theta)?) {
                    o[k] = s;
                }
            }
            Ok(out)
        };
        match self.vector_mode {
            VectorSmoothing::Componentwise => components(f),
            VectorSmoothing::NormalTangential => {
                let normal: Vec<f64> = f.iter().zip(&self.normals).map(|(v, n)| v.dot(n)).collect();
                let tangential: Vec<Vec3> = f.iter().zip(&self.normals).map(|(v, n)| v - n * v.dot(n)).collect();
                let sn = self.smooth(&normal, theta)?;
                let st = components(&tangential)?;
                Ok(self
                    .normals
                    .iter()
                    .zip(sn)
                    .zip(st)
                    .map(|((n, s), t)| n * s + (t - n * t.dot(n)))
                    .collect())
            }
        }
    }
}

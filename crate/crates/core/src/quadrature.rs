//! Quadrature on the reference triangle `{(0,0), (1,0), (0,1)}`.
//!
//! Points are reference coordinates `(xi, eta)`; weights sum to 1/2.

use alloc::vec::Vec;

use crate::math::{cos, powf, sqrt, PI};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grading {
    /// Geometric subdivision ratio, `0 < ratio < 1`.
    pub ratio: f64,
    pub levels: usize,
}

impl Default for Grading {
    fn default() -> Self {
        Grading { ratio: 0.15, levels: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub order: usize,
    pub grading: Option<Grading>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p[0], p[1])).sum()
    }

    /// Same rule with barycentric roles rotated so reference vertex 0 lands on
    /// local vertex `k` (and reference edge (0,1) on local edge (k, k+1)).
    pub fn rotated(&self, k: usize) -> QuadratureRule {
        let points = self
            .points
            .iter()
            .map(|&[xi, eta]| {
                let l = [1.0 - xi - eta, xi, eta];
                let mut m = [0.0; 3];
                for i in 0..3 {
                    m[(i + k) % 3] = l[i];
                }
                [m[1], m[2]]
            })
            .collect();
        QuadratureRule { points, weights: self.weights.clone(), order: self.order, grading: self.grading }
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let mut z = cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x.push(0.5 * (1.0 - z));
        w.push(1.0 / ((1.0 - z * z) * dp * dp));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|a, b| x[*a].partial_cmp(&x[*b]).unwrap());
    (idx.iter().map(|&i| x[i]).collect(), idx.iter().map(|&i| w[i]).collect())
}

fn points_for_order(order: usize) -> usize {
    (order + 3) / 2
}

/// Symmetric Gauss rule exact for polynomials of degree `order`.
pub fn regular_rule(order: usize) -> Result<QuadratureRule> {
    if order == 0 {
        return Err(Error::InvalidArgument("quadrature order must be at least 1".into()));
    }
    let (points, weights): (Vec<[f64; 2]>, Vec<f64>) = match order {
        1 => (alloc::vec![[1.0 / 3.0, 1.0 / 3.0]], alloc::vec![0.5]),
        2 => (
            alloc::vec![[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]],
            alloc::vec![1.0 / 6.0; 3],
        ),
        3..=5 => {
            let s = sqrt(15.0);
            let a = (6.0 - s) / 21.0;
            let b = (6.0 + s) / 21.0;
            let wa = (155.0 - s) / 2400.0;
            let wb = (155.0 + s) / 2400.0;
            (
                alloc::vec![
                    [1.0 / 3.0, 1.0 / 3.0],
                    [a, a],
                    [1.0 - 2.0 * a, a],
                    [a, 1.0 - 2.0 * a],
                    [b, b],
                    [1.0 - 2.0 * b, b],
                    [b, 1.0 - 2.0 * b],
                ],
                alloc::vec![9.0 / 80.0, wa, wa, wa, wb, wb, wb],
            )
        }
        _ => {
            let n = points_for_order(order);
            let (x, w) = gauss_legendre(n);
            let mut p = Vec::with_capacity(n * n);
            let mut ws = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    let rho = x[i];
                    p.push([rho * (1.0 - x[j]), rho * x[j]]);
                    ws.push(w[i] * w[j] * rho);
                }
            }
            (p, ws)
        }
    };
    Ok(QuadratureRule { points, weights, order, grading: None })
}

fn check_grading(order: usize, g: &Grading) -> Result<()> {
    if order == 0 || !(g.ratio > 0.0 && g.ratio < 1.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "invalid quadrature parameters order={order} ratio={}",
            g.ratio
        )));
    }
    Ok(())
}

/// Geometric partition of `[0, 1]` refined toward 0: `[0, s^L], ..., [s, 1]`.
fn graded_intervals(g: &Grading) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(g.levels + 1);
    out.push((0.0, powf(g.ratio, g.levels as f64)));
    for l in (0..g.levels).rev() {
        out.push((powf(g.ratio, (l + 1) as f64), powf(g.ratio, l as f64)));
    }
    out
}

/// Graded partition with a linear degree vector: `base` points on the
/// innermost interval, one more per layer moving away from the singularity.
fn graded_layers(g: &Grading, base: usize) -> Vec<(f64, f64, usize)> {
    graded_intervals(g).into_iter().enumerate().map(|(l, (a, b))| (a, b, base + l)).collect()
}

/// hp-composite rule graded toward reference vertex 0.
///
/// Collapsed coordinates `(xi, eta) = rho * (1 - v, v)` with `2 L` geometric
/// layers in `rho` (integrands of the form `log|y|` at the vertex) and a linear
/// degree vector across layers. The angular direction carries extra points per
/// level so that integrands behaving like `1/|y|` at the vertex stay resolved.
pub fn composite_rule(order: usize, grading: Grading) -> Result<QuadratureRule> {
    check_grading(order, &grading)?;
    if grading.levels == 0 {
        let mut r = regular_rule(order)?;
        r.grading = Some(grading);
        return Ok(r);
    }
    let nr = points_for_order(order);
    let na = 2 * nr + grading.levels;
    let (xa, wa) = gauss_legendre(na);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (a, b, n) in graded_layers(&Grading { ratio: grading.ratio, levels: 2 * grading.levels }, nr) {
        let (xr, wr) = gauss_legendre(n);
        let h = b - a;
        for i in 0..n {
            let rho = a + h * xr[i];
            for j in 0..na {
                points.push([rho * (1.0 - xa[j]), rho * xa[j]]);
                weights.push(h * wr[i] * wa[j] * rho);
            }
        }
    }
    Ok(QuadratureRule { points, weights, order, grading: Some(grading) })
}

/// Rule graded toward the reference edge from (0,0) to (1,0).
///
/// Collapsed at the opposite vertex: `(xi, eta) = (w u, 1 - w)`, graded in
/// `1 - w` toward the edge with `2 L` levels (logarithmic edge singularities)
/// and in `u` toward both edge ends with `L` levels.
pub fn edge_graded_rule(order: usize, grading: Grading) -> Result<QuadratureRule> {
    check_grading(order, &grading)?;
    let n = points_for_order(order);
    let across = graded_layers(&Grading { ratio: grading.ratio, levels: 2 * grading.levels }, n);
    let mut along: Vec<(f64, f64, usize)> = Vec::new();
    for (a, b, m) in graded_layers(&grading, n + 1) {
        along.push((0.5 * a, 0.5 * b, m));
        along.push((1.0 - 0.5 * b, 1.0 - 0.5 * a, m));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for &(a, b, m) in &across {
        let (xd, wd) = gauss_legendre(m);
        let h = b - a;
        for i in 0..m {
            let d = a + h * xd[i];
            let w = 1.0 - d;
            for &(c, e, ma) in &along {
                let (xa, wa) = gauss_legendre(ma);
                let k = e - c;
                for j in 0..ma {
                    let u = c + k * xa[j];
                    points.push([w * u, d]);
                    weights.push(h * wd[i] * k * wa[j] * w);
                }
            }
        }
    }
    Ok(QuadratureRule { points, weights, order, grading: Some(grading) })
}

/// Rule for integrands singular along all three edges: three edge-graded
/// rules on the sub-triangles formed with the centroid.
pub fn self_graded_rule(order: usize, grading: Grading) -> Result<QuadratureRule> {
    let base = edge_graded_rule(order, grading)?;
    let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let c = [1.0 / 3.0, 1.0 / 3.0];
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for k in 0..3 {
        let (p0, p1) = (v[k], v[(k + 1) % 3]);
        // Sub-triangle (p0, p1, c), with reference edge (0,1) mapped to (p0, p1).
        for (pt, w) in base.points.iter().zip(&base.weights) {
            let (s, t) = (pt[0], pt[1]);
            points.push([
                p0[0] + s * (p1[0] - p0[0]) + t * (c[0] - p0[0]),
                p0[1] + s * (p1[1] - p0[1]) + t * (c[1] - p0[1]),
            ]);
            weights.push(w / 3.0);
        }
    }
    Ok(QuadratureRule { points, weights, order, grading: Some(grading) })
}

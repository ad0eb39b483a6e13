use alloc::vec::Vec;

use super::interp::{cell_window, Cubic};
use super::Grid;
use crate::math::{abs, sqrt};
use crate::{Error, Params, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub x: [f64; 2],
    /// `∇r` at the point; it points into the fluid.
    pub grad: [f64; 2],
    pub slope: f64,
}

/// Located zero set of `r`. In one dimension the points are the sorted roots;
/// in two dimensions they are edge crossings ordered by angle about their
/// centroid, forming a closed polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    pub dim: usize,
    pub points: Vec<BoundaryPoint>,
}

impl Boundary {
    pub fn check_slopes(&self, p: &Params) -> Result<()> {
        for bp in &self.points {
            if !(bp.slope >= p.vacuum_slope_min && bp.slope <= p.vacuum_slope_max) {
                return Err(Error::SlopeOutOfRange {
                    slope: bp.slope,
                    min: p.vacuum_slope_min,
                    max: p.vacuum_slope_max,
                });
            }
        }
        Ok(())
    }

    /// Point nearest to `x`.
    pub fn nearest(&self, x: [f64; 2]) -> Option<&BoundaryPoint> {
        self.points.iter().min_by(|a, b| {
            let da = sq(a.x[0] - x[0]) + sq(a.x[1] - x[1]);
            let db = sq(b.x[0] - x[0]) + sq(b.x[1] - x[1]);
            da.total_cmp(&db)
        })
    }

    /// Roots in one dimension.
    pub fn roots(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x[0]).collect()
    }
}

/// Cubic through the window of cell `i` on the line `base + k * stride`.
pub(crate) fn line_cell_cubic(psi: &[f64], base: usize, stride: usize, n: usize, i: usize) -> Cubic {
    let at = |k: usize| psi[base + k * stride];
    let st = cell_window(i, n, at(i), at(i + 1));
    let ts = [0, 1, 2, 3].map(|k| (st + k) as f64 - i as f64);
    let vals = [0, 1, 2, 3].map(|k| at(st + k));
    Cubic::through(ts, vals)
}

fn sq(x: f64) -> f64 {
    x * x
}

fn crosses(a: f64, b: f64) -> bool {
    (a > 0.0) != (b > 0.0)
}

pub fn locate_boundary(r: &[f64], grid: &Grid) -> Result<Boundary> {
    let d = grid.dim();
    let [n0, n1] = grid.n();
    let mut points = Vec::new();
    if d == 1 {
        let h = grid.h(0);
        for i in 0..n0 - 1 {
            if crosses(r[i], r[i + 1]) {
                let cub = line_cell_cubic(r, 0, 1, n0, i);
                let t = cub.root_in_unit();
                let g = cub.deriv(t) / h;
                points.push(BoundaryPoint { x: [grid.coord(0, i) + t * h, 0.0], grad: [g, 0.0], slope: abs(g) });
            }
        }
    } else {
        let (hx, hy) = (grid.h(0), grid.h(1));
        let grad_axis = |axis: usize, i: usize, j: usize| -> f64 {
            let (n, k, h) = if axis == 0 { (n0, i, hx) } else { (n1, j, hy) };
            let at = |m: usize| if axis == 0 { r[grid.index(m, j)] } else { r[grid.index(i, m)] };
            if k == 0 {
                (at(1) - at(0)) / h
            } else if k == n - 1 {
                (at(k) - at(k - 1)) / h
            } else {
                (at(k + 1) - at(k - 1)) / (2.0 * h)
            }
        };
        for j in 0..n1 {
            for i in 0..n0 - 1 {
                if crosses(r[grid.index(i, j)], r[grid.index(i + 1, j)]) {
                    let cub = line_cell_cubic(r, grid.index(0, j), 1, n0, i);
                    let t = cub.root_in_unit();
                    let gy = (1.0 - t) * grad_axis(1, i, j) + t * grad_axis(1, i + 1, j);
                    let g = [cub.deriv(t) / hx, gy];
                    points.push(BoundaryPoint {
                        x: [grid.coord(0, i) + t * hx, grid.coord(1, j)],
                        grad: g,
                        slope: sqrt(g[0] * g[0] + g[1] * g[1]),
                    });
                }
            }
        }
        for i in 0..n0 {
            for j in 0..n1 - 1 {
                if crosses(r[grid.index(i, j)], r[grid.index(i, j + 1)]) {
                    let cub = line_cell_cubic(r, grid.index(i, 0), n0, n1, j);
                    let t = cub.root_in_unit();
                    let gx = (1.0 - t) * grad_axis(0, i, j) + t * grad_axis(0, i, j + 1);
                    let g = [gx, cub.deriv(t) / hy];
                    points.push(BoundaryPoint {
                        x: [grid.coord(0, i), grid.coord(1, j) + t * hy],
                        grad: g,
                        slope: sqrt(g[0] * g[0] + g[1] * g[1]),
                    });
                }
            }
        }
        if !points.is_empty() {
            let m = points.len() as f64;
            let cx = points.iter().map(|p| p.x[0]).sum::<f64>() / m;
            let cy = points.iter().map(|p| p.x[1]).sum::<f64>() / m;
            points.sort_by(|a, b| {
                let ta = libm::atan2(a.x[1] - cy, a.x[0] - cx);
                let tb = libm::atan2(b.x[1] - cy, b.x[0] - cx);
                ta.total_cmp(&tb)
            });
        }
    }
    if points.is_empty() {
        return Err(Error::DegenerateDomain);
    }
    Ok(Boundary { dim: d, points })
}

fn seg_dist(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let l2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if l2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + t * ab[0] - p[0], a[1] + t * ab[1] - p[1]];
    sqrt(q[0] * q[0] + q[1] * q[1])
}

pub fn dist_to_boundary(x: [f64; 2], b: &Boundary) -> f64 {
    if b.dim == 1 || b.points.len() < 2 {
        return b
            .points
            .iter()
            .map(|p| sqrt(sq(p.x[0] - x[0]) + sq(p.x[1] - x[1])))
            .fold(f64::INFINITY, f64::min);
    }
    let m = b.points.len();
    (0..m).map(|k| seg_dist(x, b.points[k].x, b.points[(k + 1) % m].x)).fold(f64::INFINITY, f64::min)
}

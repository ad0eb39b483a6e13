//! The fixed ambient grid, fields living on it, and the geometry of the fluid
//! region `{r > 0}`.

mod boundary;
mod interp;
mod quadrature;
mod resample;

use alloc::vec;
use alloc::vec::Vec;

pub use boundary::{dist_to_boundary, locate_boundary, Boundary, BoundaryPoint};
pub use interp::{interp_at, lagrange4, Cubic};
pub use quadrature::{integrate, weighted_integral};
/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn quadrature_rule(n: usize) -> Vec<(f64, f64)> {
    quadrature::gauss_legendre(n)
}
pub use resample::{extend, resample, Resampled};

use crate::{Error, Result};

/// Nodes of the collar around the fluid that carry extended values used by
/// stencils reaching across the boundary.
pub const COLLAR: usize = 3;
/// Extrapolation continues this many nodes past the fluid before freezing.
pub const EXTEND: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    n: [usize; 2],
}

impl Grid {
    pub fn new_1d(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo < hi) || n < 16 {
            return Err(Error::InvalidParams("grid needs lo < hi and at least 16 points"));
        }
        Ok(Grid { dim: 1, lo: [lo, 0.0], hi: [hi, 0.0], n: [n, 1] })
    }

    pub fn new_2d(lo: [f64; 2], hi: [f64; 2], n: [usize; 2]) -> Result<Self> {
        if !(lo[0] < hi[0] && lo[1] < hi[1]) || n[0] < 16 || n[1] < 16 {
            return Err(Error::InvalidParams("grid needs lo < hi and at least 16 points per axis"));
        }
        Ok(Grid { dim: 2, lo, hi, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> [f64; 2] {
        self.lo
    }

    pub fn hi(&self) -> [f64; 2] {
        self.hi
    }

    pub fn n(&self) -> [usize; 2] {
        self.n
    }

    pub fn h(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.n[axis] - 1) as f64
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.h(a)).product()
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.n[0] * j
    }

    pub fn ij(&self, node: usize) -> [usize; 2] {
        [node % self.n[0], node / self.n[0]]
    }

    pub fn stride(&self, axis: usize) -> usize {
        if axis == 0 { 1 } else { self.n[0] }
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lo[axis] + i as f64 * self.h(axis)
    }

    pub fn x(&self, node: usize) -> [f64; 2] {
        let [i, j] = self.ij(node);
        if self.dim == 1 { [self.coord(0, i), 0.0] } else { [self.coord(0, i), self.coord(1, j)] }
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        (0..self.dim).all(|a| x[a] >= self.lo[a] && x[a] <= self.hi[a])
    }
}

/// Node values of a scalar or vector quantity, stored component by component.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    ncomp: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid, ncomp: usize) -> Self {
        Field { grid, ncomp, data: vec![0.0; grid.len() * ncomp] }
    }

    pub fn scalar_from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let data = (0..grid.len()).map(|n| f(grid.x(n))).collect();
        Field { grid, ncomp: 1, data }
    }

    /// Vector field with `grid.dim()` components.
    pub fn vector_from_fn(grid: Grid, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let d = grid.dim();
        let mut out = Field::zeros(grid, d);
        for n in 0..grid.len() {
            let v = f(grid.x(n));
            for c in 0..d {
                out.data[c * grid.len() + n] = v[c];
            }
        }
        out
    }

    pub fn from_components(grid: Grid, comps: Vec<Vec<f64>>) -> Result<Self> {
        let ncomp = comps.len();
        let mut data = Vec::with_capacity(ncomp * grid.len());
        for c in comps {
            if c.len() != grid.len() {
                return Err(Error::Mismatch);
            }
            data.extend(c);
        }
        Ok(Field { grid, ncomp, data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, node: usize, c: usize) -> f64 {
        self.data[c * self.grid.len() + node]
    }

    pub fn set(&mut self, node: usize, c: usize, value: f64) {
        let n = self.grid.len();
        self.data[c * n + node] = value;
    }

    /// Spatial vector at a node, zero padded to two components.
    pub fn vec_at(&self, node: usize) -> [f64; 2] {
        let mut v = [0.0; 2];
        for (c, slot) in v.iter_mut().enumerate().take(self.ncomp.min(2)) {
            *slot = self.get(node, c);
        }
        v
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &Field) -> bool {
        self.grid == other.grid && self.ncomp == other.ncomp
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Field) -> Result<Field> {
        if !self.same_shape(other) {
            return Err(Error::Mismatch);
        }
        let data = self.data.iter().zip(&other.data).map(|(x, y)| x + a * y).collect();
        Ok(Field { grid: self.grid, ncomp: self.ncomp, data })
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field { grid: self.grid, ncomp: self.ncomp, data: self.data.iter().map(|x| a * x).collect() }
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        let n = self.grid.len();
        self.data.chunks(n).map(|c| c.to_vec()).collect()
    }
}

/// Fluid nodes (`r > 0`) and the support on which derivatives are evaluated:
/// the fluid plus a collar of [`COLLAR`] nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub inside: Vec<bool>,
    pub support: Vec<bool>,
}

impl Mask {
    pub fn full(grid: &Grid) -> Self {
        Mask { inside: vec![true; grid.len()], support: vec![true; grid.len()] }
    }

    pub fn from_r(r: &[f64], grid: &Grid) -> Self {
        let inside: Vec<bool> = r.iter().map(|&x| x > 0.0).collect();
        Mask::from_inside(inside, grid)
    }

    pub fn from_inside(inside: Vec<bool>, grid: &Grid) -> Self {
        let [n0, n1] = grid.n();
        let c = COLLAR as isize;
        let mut support = inside.clone();
        for node in 0..grid.len() {
            if !inside[node] {
                continue;
            }
            let [i, j] = grid.ij(node);
            let jr = if grid.dim() == 1 { 0..=0 } else { -c..=c };
            for dj in jr {
                for di in -c..=c {
                    let (ii, jj) = (i as isize + di, j as isize + dj);
                    if ii >= 0 && jj >= 0 && (ii as usize) < n0 && (jj as usize) < n1 {
                        support[grid.index(ii as usize, jj as usize)] = true;
                    }
                }
            }
        }
        Mask { inside, support }
    }

    pub fn count_inside(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Nodes inside the fluid at least `k` nodes (Chebyshev) from any exterior
    /// node or the edge of the grid.
    pub fn interior(&self, grid: &Grid, k: usize) -> Vec<bool> {
        let [n0, n1] = grid.n();
        let k = k as isize;
        (0..grid.len())
            .map(|node| {
                if !self.inside[node] {
                    return false;
                }
                let [i, j] = grid.ij(node);
                let jr = if grid.dim() == 1 { 0..=0 } else { -k..=k };
                for dj in jr {
                    for di in -k..=k {
                        let (ii, jj) = (i as isize + di, j as isize + dj);
                        if ii < 0 || jj < 0 || ii as usize >= n0 || jj as usize >= n1 {
                            return false;
                        }
                        if !self.inside[grid.index(ii as usize, jj as usize)] {
                            return false;
                        }
                    }
                }
                true
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = Grid::new_1d(-2.0, 2.0, 41).unwrap();
        assert!((g.h(0) - 0.1).abs() < 1e-15);
        assert_eq!(g.len(), 41);
        assert!((g.x(20)[0]).abs() < 1e-15);
        assert!(Grid::new_1d(0.0, 1.0, 8).is_err());
        let g2 = Grid::new_2d([0.0, 0.0], [1.0, 2.0], [16, 21]).unwrap();
        assert_eq!(g2.ij(g2.index(3, 5)), [3, 5]);
        assert!((g2.x(g2.index(15, 20))[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mask_collar() {
        let g = Grid::new_1d(-2.0, 2.0, 41).unwrap();
        let r: Vec<f64> = (0..41).map(|n| 1.0 - g.x(n)[0] * g.x(n)[0]).collect();
        let m = Mask::from_r(&r, &g);
        assert_eq!(m.count_inside(), 19);
        assert_eq!(m.support.iter().filter(|&&b| b).count(), 19 + 2 * COLLAR);
        let int = m.interior(&g, 5);
        assert_eq!(int.iter().filter(|&&b| b).count(), 9);
    }
}

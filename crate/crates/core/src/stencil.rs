//! Finite differences restricted to a node support.
//!
//! Where the full centered stencil fits inside the support the operator is
//! fourth order (5 points for first and second derivatives, 7 for third and
//! fourth). Otherwise the stencil is one-sided, `order + 2` points wide and
//! second order, shifted into the support. Nodes off the support get zero.

use alloc::vec;
use alloc::vec::Vec;

use crate::domain::Grid;

/// Weights of the `m`-th derivative at `z` on nodes `x`.
pub fn fornberg(z: f64, x: &[f64], m: usize) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

fn central_width(order: usize) -> usize {
    if order <= 2 { 5 } else { 7 }
}

/// Differentiation on a fixed grid and support.
#[derive(Clone)]
pub struct Differ<'a> {
    grid: &'a Grid,
    support: &'a [bool],
    central: Vec<Vec<f64>>,
}

impl<'a> Differ<'a> {
    pub fn new(grid: &'a Grid, support: &'a [bool]) -> Self {
        let central = (0..=4)
            .map(|m| {
                if m == 0 {
                    return vec![1.0];
                }
                let w = central_width(m) as isize;
                let xs: Vec<f64> = (-(w / 2)..=w / 2).map(|k| k as f64).collect();
                fornberg(0.0, &xs, m)
            })
            .collect();
        Differ { grid, support, central }
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }

    pub fn support(&self) -> &[bool] {
        self.support
    }

    /// `∂_axis^order f`.
    pub fn dn(&self, f: &[f64], axis: usize, order: usize) -> Vec<f64> {
        if order == 0 {
            return self.masked(f);
        }
        let g = self.grid;
        let n = g.n()[axis];
        let stride = g.stride(axis);
        let inv_h = 1.0 / libm::pow(g.h(axis), order as f64);
        let mut out = vec![0.0; g.len()];
        let cw = central_width(order);
        for node in 0..g.len() {
            if !self.support[node] {
                continue;
            }
            let i = g.ij(node)[axis];
            let base = node - i * stride;
            let ok = |k: usize| self.support[base + k * stride];
            let (mut lo, mut hi) = (i, i);
            while lo > 0 && ok(lo - 1) && i - lo < cw {
                lo -= 1;
            }
            while hi + 1 < n && ok(hi + 1) && hi - i < cw {
                hi += 1;
            }
            let half = cw / 2;
            let acc = if i >= lo + half && i + half <= hi {
                let w = &self.central[order];
                (0..cw).map(|k| w[k] * f[base + (i - half + k) * stride]).sum::<f64>()
            } else {
                let avail = hi - lo + 1;
                let width = if avail >= order + 2 {
                    order + 2
                } else if avail > order {
                    order + 1
                } else {
                    continue;
                };
                let st = (i as isize - (width / 2) as isize).clamp(lo as isize, (hi + 1 - width) as isize) as usize;
                let xs: Vec<f64> = (st..st + width).map(|k| k as f64 - i as f64).collect();
                let w = fornberg(0.0, &xs, order);
                (0..width).map(|k| w[k] * f[base + (st + k) * stride]).sum::<f64>()
            };
            out[node] = acc * inv_h;
        }
        out
    }

    pub fn d(&self, f: &[f64], axis: usize) -> Vec<f64> {
        self.dn(f, axis, 1)
    }

    /// `∂^α f` with `α = (α_x, α_y)`.
    pub fn partial(&self, f: &[f64], alpha: [usize; 2]) -> Vec<f64> {
        let first = self.dn(f, 0, alpha[0]);
        if self.grid.dim() == 1 || alpha[1] == 0 { first } else { self.dn(&first, 1, alpha[1]) }
    }

    /// Gradient components, one per spatial axis.
    pub fn grad(&self, f: &[f64]) -> Vec<Vec<f64>> {
        (0..self.grid.dim()).map(|a| self.d(f, a)).collect()
    }

    fn masked(&self, f: &[f64]) -> Vec<f64> {
        f.iter().zip(self.support).map(|(&v, &s)| if s { v } else { 0.0 }).collect()
    }
}

/// Multi-indices of total order exactly `j` in dimension `d`.
pub fn multi_indices(d: usize, j: usize) -> Vec<[usize; 2]> {
    if d == 1 { vec![[j, 0]] } else { (0..=j).map(|a| [j - a, a]).collect() }
}

/// Multinomial weight `|α|!/α!` so that `Σ_{|α|=j} w_α (∂^α f)²` equals the
/// full tensor norm `|∇^j f|²`.
pub fn multinomial(alpha: [usize; 2]) -> f64 {
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    fact(alpha[0] + alpha[1]) / (fact(alpha[0]) * fact(alpha[1]))
}

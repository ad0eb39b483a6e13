use super::Grid;
use crate::math::floor;

/// Lagrange weights at `t` for the four nodes `ts`.
pub fn lagrange4(t: f64, ts: [f64; 4]) -> [f64; 4] {
    let mut w = [1.0; 4];
    for j in 0..4 {
        for m in 0..4 {
            if m != j {
                w[j] *= (t - ts[m]) / (ts[j] - ts[m]);
            }
        }
    }
    w
}

/// First node of the 4-point window used inside cell `i` (nodes `i`, `i+1`) of
/// a line with `n` nodes. Cells that cut the boundary lean three nodes into the
/// fluid so values there come mostly from genuine data.
pub(crate) fn cell_window(i: usize, n: usize, psi_i: f64, psi_ip1: f64) -> usize {
    let start: isize = match (psi_i > 0.0, psi_ip1 > 0.0) {
        (true, false) => i as isize - 2,
        (false, true) => i as isize,
        _ => i as isize - 1,
    };
    start.clamp(0, n as isize - 4) as usize
}

/// Cubic in the local cell coordinate `t = (x - x_i)/h`, monomial basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cubic {
    pub c: [f64; 4],
}

impl Cubic {
    /// Interpolant through `vals` at offsets `ts`.
    pub fn through(ts: [f64; 4], vals: [f64; 4]) -> Self {
        let mut c = [0.0; 4];
        for j in 0..4 {
            // Expand the j-th Lagrange basis polynomial.
            let mut poly = [1.0, 0.0, 0.0, 0.0];
            let mut denom = 1.0;
            let mut deg = 0;
            for m in 0..4 {
                if m == j {
                    continue;
                }
                denom *= ts[j] - ts[m];
                let mut next = [0.0; 4];
                for k in 0..=deg {
                    next[k + 1] += poly[k];
                    next[k] -= ts[m] * poly[k];
                }
                poly = next;
                deg += 1;
            }
            for k in 0..4 {
                c[k] += vals[j] * poly[k] / denom;
            }
        }
        Cubic { c }
    }

    pub fn eval(&self, t: f64) -> f64 {
        ((self.c[3] * t + self.c[2]) * t + self.c[1]) * t + self.c[0]
    }

    pub fn deriv(&self, t: f64) -> f64 {
        (3.0 * self.c[3] * t + 2.0 * self.c[2]) * t + self.c[1]
    }

    /// Quadratic `q` with `p(t) = p(t0) + (t - t0) q(t)`.
    pub fn deflate(&self, t0: f64) -> [f64; 3] {
        let b2 = self.c[3];
        let b1 = self.c[2] + t0 * b2;
        let b0 = self.c[1] + t0 * b1;
        [b0, b1, b2]
    }

    /// Root in `[0, 1]` given a sign change between the endpoints.
    pub fn root_in_unit(&self) -> f64 {
        let (mut a, mut b) = (0.0_f64, 1.0_f64);
        let fa = self.eval(a);
        if fa == 0.0 {
            return 0.0;
        }
        let sa = fa > 0.0;
        let mut t = 0.5;
        for _ in 0..100 {
            let f = self.eval(t);
            if f == 0.0 {
                return t;
            }
            if (f > 0.0) == sa { a = t } else { b = t }
            let d = self.deriv(t);
            let newton = t - f / d;
            t = if d != 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if b - a < 1e-15 {
                break;
            }
        }
        t
    }
}

/// Tensor-product cubic interpolation with centered windows; `None` outside the box.
pub fn interp_at(grid: &Grid, f: &[f64], x: [f64; 2]) -> Option<f64> {
    let d = grid.dim();
    let mut starts = [0usize; 2];
    let mut weights = [[0.0; 4]; 2];
    for a in 0..d {
        let h = grid.h(a);
        let s = (x[a] - grid.lo()[a]) / h;
        let n = grid.n()[a];
        if s < -1e-9 || s > (n - 1) as f64 + 1e-9 {
            return None;
        }
        let i = (floor(s) as isize).clamp(0, n as isize - 2) as usize;
        let st = (i as isize - 1).clamp(0, n as isize - 4) as usize;
        starts[a] = st;
        let ts = [0.0, 1.0, 2.0, 3.0];
        weights[a] = lagrange4(s - st as f64, ts);
    }
    let mut acc = 0.0;
    if d == 1 {
        for k in 0..4 {
            acc += weights[0][k] * f[starts[0] + k];
        }
    } else {
        for l in 0..4 {
            let mut row = 0.0;
            for k in 0..4 {
                row += weights[0][k] * f[grid.index(starts[0] + k, starts[1] + l)];
            }
            acc += weights[1][l] * row;
        }
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_reproduces_and_deflates() {
        let p = |t: f64| 2.0 - t + 0.5 * t * t - 0.25 * t * t * t;
        let ts = [-1.0, 0.0, 1.0, 2.0];
        let c = Cubic::through(ts, ts.map(p));
        for t in [-0.7, 0.3, 1.9] {
            assert!((c.eval(t) - p(t)).abs() < 1e-13);
        }
        let q = c.deflate(0.4);
        let t = 1.3;
        assert!((p(0.4) + (t - 0.4) * (q[0] + q[1] * t + q[2] * t * t) - p(t)).abs() < 1e-13);
    }

    #[test]
    fn root_finding() {
        let c = Cubic { c: [-0.3, 1.0, 0.0, 0.0] };
        assert!((c.root_in_unit() - 0.3).abs() < 1e-15);
        let c = Cubic { c: [0.49, 0.0, -1.0, 0.0] };
        assert!((c.root_in_unit() - 0.7).abs() < 1e-14);
    }

    #[test]
    fn tensor_interp_exact_on_cubics() {
        let g = Grid::new_2d([0.0, 0.0], [1.0, 1.0], [17, 17]).unwrap();
        let f: alloc::vec::Vec<f64> = (0..g.len())
            .map(|n| {
                let [x, y] = g.x(n);
                x * x * x - 2.0 * x * y * y + y
            })
            .collect();
        let v = interp_at(&g, &f, [0.33, 0.71]).unwrap();
        assert!((v - (0.33f64.powi(3) - 2.0 * 0.33 * 0.71 * 0.71 + 0.71)).abs() < 1e-12);
        assert!(interp_at(&g, &f, [1.2, 0.5]).is_none());
    }
}

use alloc::vec;
use alloc::vec::Vec;

use super::interp::lagrange4;
use super::{Grid, EXTEND};
use crate::{Error, Result};

/// Grid values interpolated from scattered samples; `covered[n]` is false for
/// nodes outside the sampled range.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub values: Vec<Vec<f64>>,
    pub covered: Vec<bool>,
}

/// Cubic interpolation of scattered one-dimensional samples onto grid nodes.
/// `points` must be strictly increasing with gaps of at most `2h`.
pub fn resample(grid: &Grid, points: &[f64], values: &[&[f64]]) -> Result<Resampled> {
    if grid.dim() != 1 {
        return Err(Error::Unsupported("resampling is one-dimensional"));
    }
    let m = points.len();
    if m < 4 || values.iter().any(|v| v.len() != m) {
        return Err(Error::Mismatch);
    }
    let h = grid.h(0);
    for k in 0..m - 1 {
        if !(points[k + 1] > points[k]) {
            return Err(Error::FoldOver { index: k });
        }
    }
    let n = grid.len();
    let mut out = vec![vec![0.0; n]; values.len()];
    let mut covered = vec![false; n];
    let mut k = 0;
    for node in 0..n {
        let x = grid.coord(0, node);
        if x < points[0] || x > points[m - 1] {
            continue;
        }
        while k + 2 < m && points[k + 1] < x {
            k += 1;
        }
        if points[k + 1] - points[k] > 2.0 * h + 1e-12 {
            return Err(Error::CoverageGap { node });
        }
        let st = k.saturating_sub(1).min(m - 4);
        let ts = [points[st], points[st + 1], points[st + 2], points[st + 3]];
        let w = lagrange4(x, ts);
        for (o, v) in out.iter_mut().zip(values) {
            o[node] = w[0] * v[st] + w[1] * v[st + 1] + w[2] * v[st + 2] + w[3] * v[st + 3];
        }
        covered[node] = true;
    }
    Ok(Resampled { values: out, covered })
}

/// Overwrites values off the fluid: quadratic extrapolation from the three
/// nearest fluid nodes for up to [`EXTEND`] nodes, frozen beyond that.
pub fn extend(grid: &Grid, inside: &[bool], f: &mut [f64]) {
    if grid.dim() != 1 {
        return;
    }
    let n = grid.len();
    let quad = |f: &[f64], e: usize, s: isize, t: f64| -> Option<f64> {
        let e1 = e as isize - s;
        let e2 = e as isize - 2 * s;
        if e2 < 0 || e2 >= n as isize || !inside[e1 as usize] || !inside[e2 as usize] {
            return None;
        }
        let l0 = (t + 1.0) * (t + 2.0) / 2.0;
        let l1 = -t * (t + 2.0);
        let l2 = t * (t + 1.0) / 2.0;
        Some(l0 * f[e] + l1 * f[e1 as usize] + l2 * f[e2 as usize])
    };
    let src = f.to_vec();
    let mut i = 0;
    while i < n {
        if inside[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && !inside[i] {
            i += 1;
        }
        let end = i; // outside run is start..end
        let left = start.checked_sub(1);
        let right = (end < n).then_some(end);
        for node in start..end {
            let dl = left.map(|e| node - e);
            let dr = right.map(|e| e - node);
            let (e, s, dist) = match (dl, dr) {
                (Some(a), Some(b)) if b < a => (right.unwrap(), -1isize, b),
                (Some(a), _) => (left.unwrap(), 1, a),
                (None, Some(b)) => (right.unwrap(), -1, b),
                (None, None) => continue,
            };
            let t = dist.min(EXTEND) as f64;
            f[node] = quad(&src, e, s, t).unwrap_or(src[e]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scattered(n: usize, lo: f64, hi: f64, shift: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).map(|x| x + shift(x)).collect()
    }

    #[test]
    fn reproduces_cubics() {
        let g = Grid::new_1d(-1.0, 1.0, 65).unwrap();
        let pts = scattered(70, -1.05, 1.05, |x| 0.01 * libm::sin(3.0 * x));
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x * x;
        let vals: Vec<f64> = pts.iter().map(|&x| f(x)).collect();
        let lin: Vec<f64> = pts.iter().map(|&x| 3.0 * x - 1.0).collect();
        let res = resample(&g, &pts, &[&vals, &lin]).unwrap();
        for node in 0..g.len() {
            let x = g.coord(0, node);
            assert!(res.covered[node]);
            assert!((res.values[0][node] - f(x)).abs() < 1e-10);
            assert!((res.values[1][node] - (3.0 * x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_field_fourth_order() {
        let mut errs = Vec::new();
        for n in [129, 257] {
            let g = Grid::new_1d(-1.0, 1.0, n).unwrap();
            let pts = scattered(n + 3, -1.02, 1.02, |x| 0.2 / n as f64 * libm::cos(x));
            let vals: Vec<f64> = pts.iter().map(|&x| libm::exp(libm::sin(2.0 * x))).collect();
            let res = resample(&g, &pts, &[&vals]).unwrap();
            let e = (0..n)
                .map(|k| (res.values[0][k] - libm::exp(libm::sin(2.0 * g.coord(0, k)))).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[0] / errs[1] > 12.0, "{errs:?}");
    }

    #[test]
    fn gaps_and_folds() {
        let g = Grid::new_1d(0.0, 1.0, 33).unwrap();
        let mut pts = scattered(33, 0.0, 1.0, |_| 0.0);
        pts.remove(10);
        pts.remove(10);
        let vals = vec![0.0; pts.len()];
        assert!(matches!(resample(&g, &pts, &[&vals]), Err(Error::CoverageGap { node: 10 })));
        let mut pts = scattered(33, 0.0, 1.0, |_| 0.0);
        pts.swap(4, 5);
        let vals = vec![0.0; 33];
        assert!(matches!(resample(&g, &pts, &[&vals]), Err(Error::FoldOver { index: 4 })));
    }

    #[test]
    fn extension_is_quadratic_then_frozen() {
        let g = Grid::new_1d(-2.0, 2.0, 41).unwrap();
        let mut f: Vec<f64> = (0..41).map(|k| 1.0 - g.coord(0, k).powi(2)).collect();
        let inside: Vec<bool> = f.iter().map(|&v| v > 0.0).collect();
        let exact = f.clone();
        for (k, v) in f.iter_mut().enumerate() {
            if !inside[k] {
                *v = 99.0;
            }
        }
        extend(&g, &inside, &mut f);
        // Nodes 0.1 .. 0.5 beyond each root reproduce the parabola.
        for k in 0..41 {
            let x = g.coord(0, k).abs();
            if !inside[k] && x <= 1.0 + 0.5 + 1e-9 {
                assert!((f[k] - exact[k]).abs() < 1e-12, "{k}");
            }
        }
        assert!((f[0] - f[4]).abs() < 1e-12);
    }
}

//! Distances between two solutions on the intersection of their domains.
//!
//! With `μ = r₁ + r₂`, `ν = r₁ − r₂` and `e = (1−κ)/κ`:
//! `D = ∫ μ^e (ν² + μ|v₁−v₂|²)` and
//! `D̃ = ∫ μ^e (a ν² + b (a₂₁+a₂₂)⁻¹ G_mid (v₁−v₂)(v₁−v₂))`, `a = χ(ν/μ)`, `b = μa`.
//!
//! `χ` is even, equal to 1 on `|s| ≤ 1/4` and 0 on `|s| ≥ 1/2`, and in between
//! `χ(s) = ψ(1/2 − |s|) / (ψ(1/2 − |s|) + ψ(|s| − 1/4))` with `ψ(t) = e^{−1/t}` for `t > 0`.

use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{integrate, interp_at, locate_boundary, dist_to_boundary, Grid};
use crate::dynamics::GoodState;
use crate::goodvars::{coefficients_unchecked, GoodPoint, Params};
use crate::math::{exp, log, pow, sqrt};
use crate::spaces::control_norms;
use crate::{Error, Result};

/// Boundaries further apart than this fraction of the box width are refused.
pub const CLOSENESS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConfig {
    /// `χ = 1` for `|s| ≤ inner`.
    pub inner: f64,
    /// `χ = 0` for `|s| ≥ outer`.
    pub outer: f64,
}

impl Default for PairConfig {
    fn default() -> Self {
        PairConfig { inner: 0.25, outer: 0.5 }
    }
}

fn psi(t: f64) -> f64 {
    if t > 0.0 { exp(-1.0 / t) } else { 0.0 }
}

impl PairConfig {
    pub fn chi(&self, s: f64) -> f64 {
        let s = s.abs();
        if s <= self.inner {
            return 1.0;
        }
        if s >= self.outer {
            return 0.0;
        }
        let w = self.outer - self.inner;
        let (p, q) = (psi((self.outer - s) / w), psi((s - self.inner) / w));
        p / (p + q)
    }

    /// `a(μ, ν) = χ(ν/μ)`.
    pub fn a(&self, mu: f64, nu: f64) -> f64 {
        if mu > 0.0 { self.chi(nu / mu) } else { 0.0 }
    }

    /// `b(μ, ν) = μ a(μ, ν)`.
    pub fn b(&self, mu: f64, nu: f64) -> f64 {
        mu * self.a(mu, nu)
    }
}

fn check_pair(s1: &GoodState, s2: &GoodState) -> Result<()> {
    if s1.grid() != s2.grid() || s1.params() != s2.params() {
        return Err(Error::Mismatch);
    }
    let g = s1.grid();
    let width = (0..g.dim()).map(|a| g.hi()[a] - g.lo()[a]).fold(f64::INFINITY, f64::min);
    let (b1, b2) = (s1.boundary()?, s2.boundary()?);
    let gap = if g.dim() == 1 {
        let (x1, x2) = (b1.roots(), b2.roots());
        if x1.len() != x2.len() {
            return Err(Error::BoundariesApart { gap: f64::INFINITY });
        }
        x1.iter().zip(&x2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        let one = b1.points.iter().map(|p| dist_to_boundary(p.x, &b2)).fold(0.0, f64::max);
        let two = b2.points.iter().map(|p| dist_to_boundary(p.x, &b1)).fold(0.0, f64::max);
        one.max(two)
    };
    if gap > CLOSENESS * width {
        return Err(Error::BoundariesApart { gap });
    }
    Ok(())
}

/// Fields handed to the quadrature: `r₁, r₂, v₁…, v₂…`.
fn pair_fields<'a>(s1: &'a GoodState, s2: &'a GoodState) -> (Vec<f64>, Vec<&'a [f64]>) {
    let psi: Vec<f64> = s1.r().comp(0).iter().zip(s2.r().comp(0)).map(|(a, b)| a.min(*b)).collect();
    let d = s1.grid().dim();
    let mut f = vec![s1.r().comp(0), s2.r().comp(0)];
    f.extend((0..d).map(|c| s1.v().comp(c)));
    f.extend((0..d).map(|c| s2.v().comp(c)));
    (psi, f)
}

fn pair_integral(s1: &GoodState, s2: &GoodState, mut g: impl FnMut(f64, f64, [f64; 2], [f64; 2]) -> f64) -> Result<f64> {
    check_pair(s1, s2)?;
    let (psi, f) = pair_fields(s1, s2);
    if !psi.iter().any(|&p| p > 0.0) {
        return Err(Error::EmptyIntersection);
    }
    let d = s1.grid().dim();
    let e = exponent(s1.params());
    Ok(integrate(s1.grid(), &psi, &f, (e + 1.0).max(0.0), |p, v| {
        if p <= 0.0 {
            return 0.0;
        }
        let (r1, r2) = (v[0].max(0.0), v[1].max(0.0));
        let mut v1 = [0.0; 2];
        let mut v2 = [0.0; 2];
        for c in 0..d {
            v1[c] = v[2 + c];
            v2[c] = v[2 + d + c];
        }
        g(r1, r2, v1, v2)
    }))
}

fn exponent(p: &Params) -> f64 {
    (1.0 - p.kappa) / p.kappa
}

/// `D_ℋ` between two states on the same grid.
pub fn d_h(s1: &GoodState, s2: &GoodState) -> Result<f64> {
    let e = exponent(s1.params());
    pair_integral(s1, s2, |r1, r2, v1, v2| {
        let mu = r1 + r2;
        let dv = (v1[0] - v2[0]) * (v1[0] - v2[0]) + (v1[1] - v2[1]) * (v1[1] - v2[1]);
        pow(mu, e) * ((r1 - r2) * (r1 - r2) + mu * dv)
    })
}

/// The degenerate distance `D̃_ℋ`.
pub fn tilde_d_h(s1: &GoodState, s2: &GoodState, cfg: &PairConfig) -> Result<f64> {
    let p = *s1.params();
    let e = exponent(&p);
    let d = p.dim;
    pair_integral(s1, s2, |r1, r2, v1, v2| {
        let (mu, nu) = (r1 + r2, r1 - r2);
        let a = cfg.a(mu, nu);
        if a == 0.0 {
            return 0.0;
        }
        let a21 = coefficients_unchecked(&GoodPoint::new(r1, v1), &p).a2;
        let a22 = coefficients_unchecked(&GoodPoint::new(r2, v2), &p).a2;
        let mid = GoodPoint::new(0.5 * mu, [0.5 * (v1[0] + v2[0]), 0.5 * (v1[1] + v2[1])]);
        let gm = coefficients_unchecked(&mid, &p).g;
        let dv = [v1[0] - v2[0], v1[1] - v2[1]];
        let mut q = 0.0;
        for i in 0..d {
            for j in 0..d {
                q += gm[i][j] * dv[i] * dv[j];
            }
        }
        pow(mu, e) * (a * nu * nu + cfg.b(mu, nu) * q / (a21 + a22))
    })
}

/// `∫_{∂(Ω₁∩Ω₂)} |r₁+r₂|^{1/κ+2} dσ`: counting measure at the endpoints in one
/// dimension, polygonal arc length in two.
pub fn boundary_proximity(s1: &GoodState, s2: &GoodState) -> Result<f64> {
    check_pair(s1, s2)?;
    let g: &Grid = s1.grid();
    let (psi, _) = pair_fields(s1, s2);
    let bd = locate_boundary(&psi, g)?;
    let pw = 1.0 / s1.params().kappa + 2.0;
    let f = |x: [f64; 2]| -> Result<f64> {
        let a = interp_at(g, s1.r().comp(0), x).ok_or(Error::OutOfBox)?;
        let b = interp_at(g, s2.r().comp(0), x).ok_or(Error::OutOfBox)?;
        Ok(pow((a + b).abs(), pw))
    };
    let pts = &bd.points;
    if g.dim() == 1 {
        return pts.iter().map(|p| f(p.x)).sum();
    }
    let mut total = 0.0;
    for i in 0..pts.len() {
        let (p, q) = (pts[i].x, pts[(i + 1) % pts.len()].x);
        let len = sqrt((p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]));
        total += 0.5 * len * (f(p)? + f(q)?);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRow {
    pub t: f64,
    pub d_h: f64,
    pub tilde_d_h: f64,
    pub proximity: f64,
    /// `B₁ + B₂`.
    pub b_sum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub rows: Vec<PairRow>,
    /// `sup_t D(t) / D(0)`.
    pub amplification: f64,
    /// Smallest `C` with `log(D(t)/D(0)) ≤ C ∫₀ᵗ (B₁+B₂)` at every sample.
    pub c_exp: f64,
    /// Smallest `C` with `D̃(t) − D̃(0) ≤ C ∫₀ᵗ (B₁+B₂) D` at every sample.
    pub c_tilde: f64,
    /// `max(D/D̃, D̃/D)` over the run.
    pub equivalence: f64,
}

pub fn pair_row(s1: &GoodState, s2: &GoodState, cfg: &PairConfig) -> Result<PairRow> {
    if (s1.t() - s2.t()).abs() > 1e-12 * s1.t().abs().max(1.0) {
        return Err(Error::Misaligned);
    }
    Ok(PairRow {
        t: s1.t(),
        d_h: d_h(s1, s2)?,
        tilde_d_h: tilde_d_h(s1, s2, cfg)?,
        proximity: boundary_proximity(s1, s2)?,
        b_sum: control_norms(s1)?.b + control_norms(s2)?.b,
    })
}

/// Distances along two co-evolved trajectories and the fitted constants.
pub fn stability_monitor(traj1: &[GoodState], traj2: &[GoodState], cfg: &PairConfig) -> Result<StabilityReport> {
    if traj1.len() != traj2.len() || traj1.is_empty() {
        return Err(Error::Misaligned);
    }
    let rows = traj1.iter().zip(traj2).map(|(a, b)| pair_row(a, b, cfg)).collect::<Result<Vec<_>>>()?;
    Ok(summarize(rows))
}

pub fn summarize(rows: Vec<PairRow>) -> StabilityReport {
    let d0 = rows[0].d_h;
    let dt0 = rows[0].tilde_d_h;
    let amplification = if d0 > 0.0 {
        rows.iter().map(|r| r.d_h / d0).fold(0.0, f64::max)
    } else if rows.iter().all(|r| r.d_h == 0.0) {
        0.0
    } else {
        f64::INFINITY
    };
    let (mut ib, mut ibd) = (0.0, 0.0);
    let (mut c_exp, mut c_tilde): (f64, f64) = (0.0, 0.0);
    let mut equivalence: f64 = 1.0;
    for (i, r) in rows.iter().enumerate() {
        if r.d_h > 0.0 && r.tilde_d_h > 0.0 {
            equivalence = equivalence.max(r.d_h / r.tilde_d_h).max(r.tilde_d_h / r.d_h);
        } else if r.d_h != r.tilde_d_h {
            equivalence = f64::INFINITY;
        }
        if i == 0 {
            continue;
        }
        let p = &rows[i - 1];
        let dt = r.t - p.t;
        ib += 0.5 * dt * (r.b_sum + p.b_sum);
        ibd += 0.5 * dt * (r.b_sum * r.d_h + p.b_sum * p.d_h);
        if d0 > 0.0 && ib > 0.0 {
            c_exp = c_exp.max(log(r.d_h / d0) / ib);
        }
        if ibd > 0.0 {
            c_tilde = c_tilde.max((r.tilde_d_h - dt0) / ibd);
        }
    }
    StabilityReport { rows, amplification, c_exp, c_tilde, equivalence }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::Family;
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::new_1d(-1.5, 1.5, 513).unwrap()
    }

    fn pair(shift: f64, dv: f64) -> (GoodState, GoodState) {
        let f = Family::blob1d();
        let p = Params::default();
        (f.state(p, grid()).unwrap(), f.perturbed_state(p, grid(), [shift, 0.0], dv).unwrap())
    }

    #[test]
    fn cutoff_profile() {
        let c = PairConfig::default();
        assert_eq!(c.chi(0.25), 1.0);
        assert_eq!(c.chi(-0.5), 0.0);
        assert!((c.chi(0.375) - 0.5).abs() < 1e-15);
        assert_eq!(c.b(2.0, 0.3), 2.0 * c.a(2.0, 0.3));
        assert_eq!(c.a(3.0, 0.6), c.a(1.0, 0.2));
    }

    #[test]
    fn identical_and_symmetric() {
        let (a, b) = pair(0.0, 0.0);
        assert_eq!(d_h(&a, &b).unwrap(), 0.0);
        assert_eq!(tilde_d_h(&a, &b, &PairConfig::default()).unwrap(), 0.0);
        assert!(boundary_proximity(&a, &b).unwrap() < 1e-24);
        let (a, b) = pair(0.01, 0.02);
        assert_eq!(d_h(&a, &b).unwrap(), d_h(&b, &a).unwrap());
        assert!(d_h(&a, &b).unwrap() > 0.0);
    }

    #[test]
    fn velocity_offset_closed_form() {
        // Same r, v₂ = v₁ + δ: D = δ² ∫ 2r = δ² · 2 · (4/3) h₀ at κ = 1.
        let (a, b) = pair(0.0, 1e-2);
        let want = 1e-4 * 2.0 * 4.0 / 3.0 * 0.06;
        assert!((d_h(&a, &b).unwrap() / want - 1.0).abs() < 1e-8);
    }

    #[test]
    fn translation_oracle_against_fine_quadrature() {
        // D for r₂ = r₁(x − δ), v₁ = v₂ = 0: ∫ (r₁−r₂)² over the overlap, by brute force.
        let f = Family::Blob1d { h0: 0.06, alpha: 0.0, beta: 0.0 };
        let p = Params::default();
        let d = 0.03;
        let (a, b) = (f.state(p, grid()).unwrap(), f.perturbed_state(p, grid(), [d, 0.0], 0.0).unwrap());
        let n = 200_000;
        let (lo, hi) = (-1.0 + d, 1.0);
        let hh = (hi - lo) / n as f64;
        let want: f64 = (0..n).map(|i| {
            let x = lo + (i as f64 + 0.5) * hh;
            let diff = f.r_at([x, 0.0]) - f.r_at([x - d, 0.0]);
            diff * diff * hh
        }).sum();
        assert!((d_h(&a, &b).unwrap() / want - 1.0).abs() < 0.01);
    }

    #[test]
    fn proximity_scaling_under_translation() {
        // Near an endpoint r₁+r₂ ≈ |∂r| δ, so the value scales like δ^{1/κ+2}.
        let v: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&d| {
            let (a, b) = pair(d, 0.0);
            boundary_proximity(&a, &b).unwrap()
        }).collect();
        let fit = crate::fit::loglog_fit(&[0.02, 0.01, 0.005], &v).unwrap();
        assert!((fit.slope - 3.0).abs() < 0.1, "{}", fit.slope);
    }

    #[test]
    fn far_boundaries_refused() {
        let (a, b) = pair(0.4, 0.0);
        assert!(matches!(d_h(&a, &b), Err(Error::BoundariesApart { .. })));
    }

    #[test]
    fn identical_trajectories_monitor() {
        let (a, _) = pair(0.0, 0.0);
        let traj = crate::dynamics::rk4_run(&a, 0.02, 0.01, crate::dynamics::System::Full).unwrap();
        let rep = stability_monitor(&traj, &traj, &PairConfig::default()).unwrap();
        assert!(rep.rows.iter().all(|r| r.d_h == 0.0 && r.tilde_d_h == 0.0));
        assert_eq!(rep.amplification, 0.0);
        assert!(stability_monitor(&traj, &traj[1..], &PairConfig::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn nonnegative_symmetric(shift in -0.05..0.05f64, dv in -0.05..0.05f64) {
            let (a, b) = pair(shift, dv);
            let c = PairConfig::default();
            let (x, y) = (d_h(&a, &b).unwrap(), d_h(&b, &a).unwrap());
            prop_assert!(x >= 0.0 && (x - y).abs() <= 1e-14 * x.max(1e-300));
            let (x, y) = (tilde_d_h(&a, &b, &c).unwrap(), tilde_d_h(&b, &a, &c).unwrap());
            prop_assert!(x >= 0.0 && (x - y).abs() <= 1e-12 * x.max(1e-300));
        }

        #[test]
        fn chi_even_and_bounded(s in -1.0..1.0f64) {
            let c = PairConfig::default();
            prop_assert_eq!(c.chi(s), c.chi(-s));
            prop_assert!((0.0..=1.0).contains(&c.chi(s)));
        }
    }
}

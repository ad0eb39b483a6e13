//! Equation of state `p = ϱ^{κ+1}`, the change of variables `(ϱ, u) ↔ (r, v)`
//! and the pointwise coefficients of the good-variable system.
//!
//! Spatial vectors are stored as `[f64; 2]`; in one dimension the second
//! component is zero and ignored.

use crate::math::{abs, pow, sqrt};
use crate::{Error, Result};

/// States with `a₀` below this are rejected as (nearly) superluminal.
pub const A0_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub kappa: f64,
    pub dim: usize,
    pub vacuum_slope_min: f64,
    pub vacuum_slope_max: f64,
    pub tol_constraint: f64,
}

impl Params {
    pub fn new(kappa: f64, dim: usize) -> Result<Self> {
        let p = Params { kappa, dim, ..Params::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn with_slopes(mut self, min: f64, max: f64) -> Result<Self> {
        self.vacuum_slope_min = min;
        self.vacuum_slope_max = max;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParams("kappa must be positive"));
        }
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidParams("dim must be 1 or 2"));
        }
        if !(self.vacuum_slope_min > 0.0 && self.vacuum_slope_min <= self.vacuum_slope_max) {
            return Err(Error::InvalidParams("need 0 < vacuum_slope_min <= vacuum_slope_max"));
        }
        if !(self.tol_constraint >= 0.0) {
            return Err(Error::InvalidParams("tol_constraint must be nonnegative"));
        }
        Ok(())
    }
}

impl Default for Params {
    fn default() -> Self {
        Params { kappa: 1.0, dim: 1, vacuum_slope_min: 1e-3, vacuum_slope_max: 1e3, tol_constraint: 1e-10 }
    }
}

/// Energy density and relativistic velocity `(u⁰, u¹, u²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalPoint {
    pub rho: f64,
    pub u: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodPoint {
    pub r: f64,
    pub v: [f64; 2],
}

impl GoodPoint {
    pub fn new(r: f64, v: [f64; 2]) -> Self {
        GoodPoint { r, v }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientBundle {
    pub v0: f64,
    pub r_bracket: f64,
    pub g: [[f64; 2]; 2],
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl CoefficientBundle {
    pub fn det_g(&self) -> f64 {
        self.g[0][0] * self.g[1][1] - self.g[0][1] * self.g[1][0]
    }
}

/// First derivatives of the coefficients with respect to `r` and `v^l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientJet {
    pub c: CoefficientBundle,
    pub dv0_dr: f64,
    pub dv0_dv: [f64; 2],
    pub da0_dr: f64,
    pub da0_dv: [f64; 2],
    pub da1_dr: f64,
    pub da1_dv: [f64; 2],
    pub da2_dr: f64,
    pub da2_dv: [f64; 2],
    pub dg_dr: [[f64; 2]; 2],
    /// `dg_dv[l][i][j] = ∂G^{ij}/∂v^l`.
    pub dg_dv: [[[f64; 2]; 2]; 2],
}

pub fn pressure(rho: f64, p: &Params) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::Domain { what: "rho", value: rho });
    }
    Ok(pow(rho, p.kappa + 1.0))
}

pub fn sound_speed_sq_of_r(r: f64, p: &Params) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Domain { what: "r", value: r });
    }
    Ok(p.kappa * r)
}

pub fn f_of_rho(rho: f64, p: &Params) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::Domain { what: "rho", value: rho });
    }
    let k = p.kappa;
    Ok(pow(1.0 + pow(rho, k), 1.0 + 1.0 / k))
}

/// `⟨r⟩ = 1 + κ r / (κ + 1)`.
#[inline]
pub fn r_bracket(r: f64, kappa: f64) -> f64 {
    1.0 + kappa * r / (kappa + 1.0)
}

#[inline]
fn v_sq(v: &[f64; 2], dim: usize) -> f64 {
    if dim == 1 { v[0] * v[0] } else { v[0] * v[0] + v[1] * v[1] }
}

/// `v⁰ = √(⟨r⟩^{2+2/κ} + |v|²)`. Defined for any `r > −(κ+1)/κ`, which lets it
/// run on the signed extension of `r` outside the fluid.
pub fn v0_of(gp: &GoodPoint, p: &Params) -> f64 {
    let k = p.kappa;
    sqrt(pow(r_bracket(gp.r, k), 2.0 + 2.0 / k) + v_sq(&gp.v, p.dim))
}

pub fn to_good(pp: &PhysicalPoint, p: &Params) -> Result<GoodPoint> {
    if !(pp.rho >= 0.0) {
        return Err(Error::Domain { what: "rho", value: pp.rho });
    }
    let spatial = if p.dim == 1 { pp.u[1] * pp.u[1] } else { pp.u[1] * pp.u[1] + pp.u[2] * pp.u[2] };
    let residual = -pp.u[0] * pp.u[0] + spatial + 1.0;
    if !(pp.u[0] > 0.0) || abs(residual) > p.tol_constraint.max(1e-12) * (1.0 + pp.u[0] * pp.u[0]) {
        return Err(Error::ConstraintViolation { residual });
    }
    let k = p.kappa;
    let f = f_of_rho(pp.rho, p)?;
    let r = (1.0 + k) / k * pow(pp.rho, k);
    let mut v = [f * pp.u[1], 0.0];
    if p.dim == 2 {
        v[1] = f * pp.u[2];
    }
    Ok(GoodPoint { r, v })
}

pub fn from_good(gp: &GoodPoint, p: &Params) -> Result<PhysicalPoint> {
    if !(gp.r >= 0.0) {
        return Err(Error::Domain { what: "r", value: gp.r });
    }
    let k = p.kappa;
    let rho = pow(k * gp.r / (1.0 + k), 1.0 / k);
    // f(ϱ) = ⟨r⟩^{1+1/κ} because ϱ^κ = κr/(κ+1).
    let f = pow(r_bracket(gp.r, k), 1.0 + 1.0 / k);
    let v0 = v0_of(gp, p);
    let mut u = [v0 / f, gp.v[0] / f, 0.0];
    if p.dim == 2 {
        u[2] = gp.v[1] / f;
    }
    Ok(PhysicalPoint { rho, u })
}

/// Coefficients with no admissibility check; used on the signed extension
/// outside the fluid where `r < 0`.
pub fn coefficients_unchecked(gp: &GoodPoint, p: &Params) -> CoefficientBundle {
    let k = p.kappa;
    let q = r_bracket(gp.r, k);
    let v2 = v_sq(&gp.v, p.dim);
    let v0 = sqrt(pow(q, 2.0 + 2.0 / k) + v2);
    let v0sq = v0 * v0;
    let a0 = 1.0 - k * gp.r * v2 / v0sq;
    let a1 = -2.0 * k * pow(q, 2.0 + 2.0 / k) / (v0sq * v0 * a0);
    let a2 = pow(q, 1.0 + 2.0 / k) / v0;
    let a3 = -(1.0 / q) * (1.0 / (k + 1.0) + v2 / v0sq);
    let c = k * q / (a0 * v0);
    let mut g = [[0.0; 2]; 2];
    for i in 0..p.dim {
        for j in 0..p.dim {
            let delta = if i == j { 1.0 } else { 0.0 };
            g[i][j] = c * (delta - gp.v[i] * gp.v[j] / v0sq);
        }
    }
    CoefficientBundle { v0, r_bracket: q, g, a0, a1, a2, a3 }
}

pub fn coefficients(gp: &GoodPoint, p: &Params) -> Result<CoefficientBundle> {
    if !(gp.r >= 0.0) {
        return Err(Error::Domain { what: "r", value: gp.r });
    }
    let c = coefficients_unchecked(gp, p);
    if !(c.a0 >= A0_MIN) {
        return Err(Error::Inadmissible { a0: c.a0, node: 0 });
    }
    Ok(c)
}

pub fn coefficient_jet(gp: &GoodPoint, p: &Params) -> CoefficientJet {
    let k = p.kappa;
    let d = p.dim;
    let c = coefficients_unchecked(gp, p);
    let (r, v) = (gp.r, gp.v);
    let q = c.r_bracket;
    let dq = k / (k + 1.0);
    let v0 = c.v0;
    let v0sq = v0 * v0;
    let v2 = v_sq(&v, d);

    let dv0_dr = c.a2;
    let mut dv0_dv = [0.0; 2];
    let mut da0_dv = [0.0; 2];
    let mut da1_dv = [0.0; 2];
    let mut da2_dv = [0.0; 2];
    let da0_dr = -k * v2 / v0sq + 2.0 * k * r * v2 * c.a2 / (v0sq * v0);
    let n = pow(q, 1.0 + 2.0 / k);
    let dn_dr = (1.0 + 2.0 / k) * pow(q, 2.0 / k) * dq;
    let da2_dr = dn_dr / v0 - c.a2 * c.a2 / v0;
    let da1_dr = c.a1 * (2.0 * n / pow(q, 2.0 + 2.0 / k) - 3.0 * c.a2 / v0 - da0_dr / c.a0);
    let pref = k * q / (c.a0 * v0);
    let dc_dr = pref * (dq / q - da0_dr / c.a0 - c.a2 / v0);
    let mut dc_dv = [0.0; 2];
    for l in 0..d {
        dv0_dv[l] = v[l] / v0;
        da0_dv[l] = -2.0 * k * r * v[l] / v0sq + 2.0 * k * r * v2 * v[l] / (v0sq * v0sq);
        da2_dv[l] = -c.a2 * v[l] / v0sq;
        da1_dv[l] = c.a1 * (-3.0 * v[l] / v0sq - da0_dv[l] / c.a0);
        dc_dv[l] = pref * (-da0_dv[l] / c.a0 - v[l] / v0sq);
    }
    let mut dg_dr = [[0.0; 2]; 2];
    let mut dg_dv = [[[0.0; 2]; 2]; 2];
    for i in 0..d {
        for j in 0..d {
            let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
            let proj = delta(i, j) - v[i] * v[j] / v0sq;
            dg_dr[i][j] = dc_dr * proj + pref * 2.0 * v[i] * v[j] * c.a2 / (v0sq * v0);
            for l in 0..d {
                let dproj = -(delta(i, l) * v[j] + v[i] * delta(j, l)) / v0sq
                    + 2.0 * v[i] * v[j] * v[l] / (v0sq * v0sq);
                dg_dv[l][i][j] = dc_dv[l] * proj + pref * dproj;
            }
        }
    }
    CoefficientJet { c, dv0_dr, dv0_dv, da0_dr, da0_dv, da1_dr, da1_dv, da2_dr, da2_dv, dg_dr, dg_dv }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p1() -> Params {
        Params::default()
    }

    fn p2(kappa: f64) -> Params {
        Params::new(kappa, 2).unwrap()
    }

    #[test]
    fn eos_examples() {
        let p = p1();
        assert_eq!(pressure(0.0, &p).unwrap(), 0.0);
        assert_eq!(pressure(1.0, &p).unwrap(), 1.0);
        assert_eq!(pressure(2.0, &p).unwrap(), 4.0);
        assert!(pressure(-1.0, &p).is_err());
        assert_eq!(sound_speed_sq_of_r(0.0, &p).unwrap(), 0.0);
        assert_eq!(sound_speed_sq_of_r(1.0, &Params::new(2.0, 1).unwrap()).unwrap(), 2.0);
        assert_eq!(sound_speed_sq_of_r(3.0, &p).unwrap(), 3.0);
        assert_eq!(f_of_rho(0.0, &p).unwrap(), 1.0);
        assert_eq!(f_of_rho(1.0, &p).unwrap(), 4.0);
        assert_eq!(f_of_rho(3.0, &p).unwrap(), 16.0);
    }

    #[test]
    fn conversion_examples() {
        let p = p1();
        let g = to_good(&PhysicalPoint { rho: 0.0, u: [1.0, 0.0, 0.0] }, &p).unwrap();
        assert_eq!((g.r, g.v[0]), (0.0, 0.0));
        let g = to_good(&PhysicalPoint { rho: 1.0, u: [sqrt(2.0), 1.0, 0.0] }, &p).unwrap();
        assert!((g.r - 2.0).abs() < 1e-14 && (g.v[0] - 4.0).abs() < 1e-14);
        assert!((v0_of(&g, &p) - 4.0 * sqrt(2.0)).abs() < 1e-13);
        let back = from_good(&GoodPoint::new(2.0, [4.0, 0.0]), &p).unwrap();
        assert!((back.rho - 1.0).abs() < 1e-14);
        assert!((back.u[0] - sqrt(2.0)).abs() < 1e-14 && (back.u[1] - 1.0).abs() < 1e-14);
        let vac = from_good(&GoodPoint::new(0.0, [0.0, 0.0]), &p).unwrap();
        assert_eq!(vac, PhysicalPoint { rho: 0.0, u: [1.0, 0.0, 0.0] });
        assert!(to_good(&PhysicalPoint { rho: 1.0, u: [1.0, 1.0, 0.0] }, &p).is_err());
    }

    #[test]
    fn v0_examples() {
        assert_eq!(v0_of(&GoodPoint::new(0.0, [0.0, 0.0]), &p1()), 1.0);
        assert!((v0_of(&GoodPoint::new(0.0, [3.0, 4.0]), &p2(1.0)) - sqrt(26.0)).abs() < 1e-14);
        assert!((v0_of(&GoodPoint::new(2.0, [0.0, 0.0]), &p1()) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn coefficients_at_rest_vacuum() {
        let p = p2(1.0);
        let c = coefficients(&GoodPoint::new(0.0, [0.0, 0.0]), &p).unwrap();
        assert_eq!((c.v0, c.r_bracket, c.a0, c.a1, c.a2, c.a3), (1.0, 1.0, 1.0, -2.0, 1.0, -0.5));
        assert_eq!(c.g, [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn superluminal_rejected() {
        // κ r |v|²/v0² → κ r as |v| → ∞; κ r ≥ 1 then drives a0 ≤ 0.
        let p = Params::new(1.0, 1).unwrap();
        assert!(matches!(
            coefficients(&GoodPoint::new(2.0, [1e6, 0.0]), &p),
            Err(Error::Inadmissible { .. })
        ));
    }

    fn fd_check(gp: GoodPoint, p: &Params) {
        let h = 1e-6;
        let jet = coefficient_jet(&gp, p);
        let at = |r: f64, v: [f64; 2]| coefficients_unchecked(&GoodPoint::new(r, v), p);
        let (cp, cm) = (at(gp.r + h, gp.v), at(gp.r - h, gp.v));
        let tol = 1e-6;
        assert!(((cp.v0 - cm.v0) / (2.0 * h) - jet.dv0_dr).abs() < tol);
        assert!(((cp.a0 - cm.a0) / (2.0 * h) - jet.da0_dr).abs() < tol);
        assert!(((cp.a1 - cm.a1) / (2.0 * h) - jet.da1_dr).abs() < tol);
        assert!(((cp.a2 - cm.a2) / (2.0 * h) - jet.da2_dr).abs() < tol);
        for i in 0..p.dim {
            for j in 0..p.dim {
                assert!(((cp.g[i][j] - cm.g[i][j]) / (2.0 * h) - jet.dg_dr[i][j]).abs() < tol);
            }
        }
        for l in 0..p.dim {
            let (mut vp, mut vm) = (gp.v, gp.v);
            vp[l] += h;
            vm[l] -= h;
            let (cp, cm) = (at(gp.r, vp), at(gp.r, vm));
            assert!(((cp.v0 - cm.v0) / (2.0 * h) - jet.dv0_dv[l]).abs() < tol);
            assert!(((cp.a0 - cm.a0) / (2.0 * h) - jet.da0_dv[l]).abs() < tol);
            assert!(((cp.a1 - cm.a1) / (2.0 * h) - jet.da1_dv[l]).abs() < tol);
            assert!(((cp.a2 - cm.a2) / (2.0 * h) - jet.da2_dv[l]).abs() < tol);
            for i in 0..p.dim {
                for j in 0..p.dim {
                    assert!(((cp.g[i][j] - cm.g[i][j]) / (2.0 * h) - jet.dg_dv[l][i][j]).abs() < tol);
                }
            }
        }
    }

    fn admissible() -> impl Strategy<Value = (f64, f64, f64, f64)> {
        (0.2f64..3.0, 0.0f64..0.3, -1.5f64..1.5, -1.5f64..1.5)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn round_trips((kappa, r, v1, v2) in admissible()) {
            let p = p2(kappa);
            let gp = GoodPoint::new(r, [v1, v2]);
            let pp = from_good(&gp, &p).unwrap();
            let back = to_good(&pp, &p).unwrap();
            prop_assert!((back.r - r).abs() <= 1e-12 * (1.0 + r));
            prop_assert!((back.v[0] - v1).abs() <= 1e-12 && (back.v[1] - v2).abs() <= 1e-12);
            let again = from_good(&back, &p).unwrap();
            prop_assert!((again.rho - pp.rho).abs() <= 1e-12);
            for a in 0..3 {
                prop_assert!((again.u[a] - pp.u[a]).abs() <= 1e-12);
            }
            let cs2 = (kappa + 1.0) * pow(pp.rho, kappa);
            prop_assert!((cs2 - kappa * r).abs() <= 1e-12);
        }

        #[test]
        fn a3_identity_and_g_spectrum((kappa, r, v1, v2) in admissible()) {
            let p = p2(kappa);
            let gp = GoodPoint::new(r, [v1, v2]);
            let c = coefficients(&gp, &p).unwrap();
            let lhs = c.a0 / (kappa * c.r_bracket) - 1.0 / kappa;
            prop_assert!((lhs - r * c.a3).abs() <= 1e-12);
            prop_assert!(c.v0 >= 1.0 && c.a0 > 0.0 && c.a0 <= 1.0 && c.a2 > 0.0);
            prop_assert_eq!(c.g[0][1], c.g[1][0]);
            let tr = c.g[0][0] + c.g[1][1];
            let det = c.det_g();
            let disc = sqrt((tr * tr / 4.0 - det).max(0.0));
            let (lo, hi) = (tr / 2.0 - disc, tr / 2.0 + disc);
            let scale = kappa * c.r_bracket / (c.a0 * c.v0);
            let vv = (v1 * v1 + v2 * v2) / (c.v0 * c.v0);
            prop_assert!(lo > 0.0);
            prop_assert!(lo >= scale * (1.0 - vv) * (1.0 - 1e-12) && hi <= scale * (1.0 + 1e-12));
        }

        #[test]
        fn jet_matches_finite_differences((kappa, r, v1, v2) in admissible()) {
            fd_check(GoodPoint::new(r, [v1, v2]), &p2(kappa));
            fd_check(GoodPoint::new(r, [v1, 0.0]), &Params::new(kappa, 1).unwrap());
        }

        #[test]
        fn f_monotone(kappa in 0.2f64..3.0, a in 0.0f64..5.0, b in 0.0f64..5.0) {
            let p = Params::new(kappa, 1).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(f_of_rho(lo, &p).unwrap() <= f_of_rho(hi, &p).unwrap());
        }
    }

    #[test]
    fn vacuum_rest_limit() {
        let p = p2(1.7);
        let c = coefficients(&GoodPoint::new(1e-9, [1e-9, -1e-9]), &p).unwrap();
        assert!((c.a0 - 1.0).abs() < 1e-12);
        assert!((c.g[0][0] - 1.7).abs() < 1e-8 && c.g[0][1].abs() < 1e-12);
    }
}

//! The linearized system around a background state:
//!
//! ```text
//! D_t s + κ⁻¹G^{ij}∂_i r w_j + r G^{ij}∂_i w_j + r a₁ v^i ∂_i s = V₁ s + r W₁·w
//! D_t w_j + a₂ ∂_j s = V₂_j s + W₂_j·w
//! ```
//!
//! The potentials are the exact first variation of [`crate::dynamics::rhs`],
//! so `lin_rhs` is the directional derivative of the full system.

use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{extend, Field};
use crate::dynamics::{rk4_advance, stage_state, state_vec, GoodState, System};
use crate::spaces::{control_b, norm_h_sq};
use crate::{Error, Result};

/// A perturbation `(s, w)` on a background's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LinState {
    pub s: Field,
    pub w: Field,
}

impl LinState {
    pub fn new(s: Field, w: Field, background: &GoodState) -> Result<Self> {
        let g = background.grid();
        if s.grid() != g || w.grid() != g || s.ncomp() != 1 || w.ncomp() != g.dim() {
            return Err(Error::Mismatch);
        }
        Ok(LinState { s, w })
    }

    pub fn zeros(background: &GoodState) -> Self {
        let g = *background.grid();
        LinState { s: Field::zeros(g, 1), w: Field::zeros(g, g.dim()) }
    }
}

/// Node values of `V₁`, `W₁^l`, `V₂_j`, `W₂_j^l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potentials {
    pub v1: Vec<f64>,
    pub w1: Vec<Vec<f64>>,
    pub v2: Vec<Vec<f64>>,
    /// `w2[j][l]`.
    pub w2: Vec<Vec<Vec<f64>>>,
}

pub fn potentials(bg: &GoodState) -> Potentials {
    let g = *bg.grid();
    let (d, n) = (g.dim(), g.len());
    let dfn = bg.differ();
    let dr = dfn.grad(bg.r().comp(0));
    let dv: Vec<Vec<Vec<f64>>> = (0..d).map(|j| dfn.grad(bg.v().comp(j))).collect();
    let mut p = Potentials {
        v1: vec![0.0; n],
        w1: vec![vec![0.0; n]; d],
        v2: vec![vec![0.0; n]; d],
        w2: vec![vec![vec![0.0; n]; d]; d],
    };
    for k in 0..n {
        if !bg.mask().support[k] {
            continue;
        }
        let jet = bg.coeff_jet(k);
        let c = jet.c;
        let gp = bg.point(k);
        let (r, v) = (gp.r, gp.v);
        let vdr: f64 = (0..d).map(|i| v[i] * dr[i][k]).sum();
        let mut gdv = 0.0;
        let mut dgdv = 0.0;
        for i in 0..d {
            for j in 0..d {
                gdv += c.g[i][j] * dv[j][i][k];
                dgdv += jet.dg_dr[i][j] * dv[j][i][k];
            }
        }
        p.v1[k] = vdr * jet.dv0_dr / (c.v0 * c.v0) - gdv - r * dgdv - c.a1 * vdr - r * jet.da1_dr * vdr;
        for l in 0..d {
            let mut t = -jet.da1_dv[l] * vdr - c.a1 * dr[l][k];
            for i in 0..d {
                t -= c.a3 * c.g[i][l] * dr[i][k];
                for m in 0..d {
                    t -= jet.dg_dv[l][i][m] * dv[m][i][k];
                }
            }
            p.w1[l][k] = t;
        }
        for j in 0..d {
            let vdvj: f64 = (0..d).map(|i| v[i] * dv[j][i][k]).sum();
            p.v2[j][k] = vdvj * jet.dv0_dr / (c.v0 * c.v0) - jet.da2_dr * dr[j][k];
            for l in 0..d {
                p.w2[j][l][k] =
                    -dv[j][l][k] / c.v0 + vdvj * jet.dv0_dv[l] / (c.v0 * c.v0) - jet.da2_dv[l] * dr[j][k];
            }
        }
    }
    p
}

/// `(∂_t s, ∂_t w)` on the background's support.
pub fn lin_rhs(ls: &LinState, bg: &GoodState) -> Result<(Field, Field)> {
    let g = *bg.grid();
    let (d, n) = (g.dim(), g.len());
    let dfn = bg.differ();
    let kap = bg.params().kappa;
    let dr = dfn.grad(bg.r().comp(0));
    let ds = dfn.grad(ls.s.comp(0));
    let dw: Vec<Vec<Vec<f64>>> = (0..d).map(|j| dfn.grad(ls.w.comp(j))).collect();
    let pot = potentials(bg);
    let mut out_s = Field::zeros(g, 1);
    let mut out_w = Field::zeros(g, d);
    for k in 0..n {
        if !bg.mask().support[k] {
            continue;
        }
        let c = bg.coeffs(k);
        let gp = bg.point(k);
        let (r, v) = (gp.r, gp.v);
        let s = ls.s.get(k, 0);
        let w = ls.w.vec_at(k);
        let vds: f64 = (0..d).map(|i| v[i] * ds[i][k]).sum();
        let mut acc = -vds / c.v0 - r * c.a1 * vds + pot.v1[k] * s;
        for i in 0..d {
            for j in 0..d {
                acc -= c.g[i][j] * (dr[i][k] * w[j] / kap + r * dw[j][i][k]);
            }
            acc += r * pot.w1[i][k] * w[i];
        }
        out_s.set(k, 0, acc);
        for j in 0..d {
            let adv: f64 = (0..d).map(|i| v[i] * dw[j][i][k]).sum();
            let mut acc = -adv / c.v0 - c.a2 * ds[j][k] + pot.v2[j][k] * s;
            for l in 0..d {
                acc += pot.w2[j][l][k] * w[l];
            }
            out_w.set(k, j, acc);
        }
    }
    Ok((out_s, out_w))
}

/// `∫ r^{(1−κ)/κ}(s² + a₂⁻¹ r G^{ij} w_i w_j)`; the squared `ℋ` norm.
pub fn e_lin(ls: &LinState, bg: &GoodState) -> Result<f64> {
    norm_h_sq(&ls.s, &ls.w, bg)
}

fn lin_vec(ls: &LinState) -> Vec<Vec<f64>> {
    let mut y = vec![ls.s.comp(0).to_vec()];
    for c in 0..ls.w.ncomp() {
        y.push(ls.w.comp(c).to_vec());
    }
    y
}

fn lin_from(y: &[Vec<f64>], bg: &GoodState) -> Result<LinState> {
    let g = *bg.grid();
    let mut s = Field::from_components(g, vec![y[0].clone()])?;
    let mut w = Field::from_components(g, y[1..].to_vec())?;
    extend(&g, &bg.mask().inside, s.comp_mut(0));
    for c in 0..w.ncomp() {
        extend(&g, &bg.mask().inside, w.comp_mut(c));
    }
    Ok(LinState { s, w })
}

/// Joint RK4 of background and perturbation with a common step.
pub fn co_evolve(bg: &GoodState, ls: &LinState, t_end: f64, dt_max: f64) -> Result<Vec<(GoodState, LinState)>> {
    let span = t_end - bg.t();
    let dt0 = dt_max.min(0.9 * bg.cfl_limit(System::Full));
    let steps = libm::ceil(span / dt0).max(1.0) as usize;
    let dt = span / steps as f64;
    let mut out = vec![(bg.clone(), ls.clone())];
    let d1 = bg.v().ncomp() + 1;
    for _ in 0..steps {
        let (b, l) = out.last().unwrap();
        if dt > b.cfl_limit(System::Full) {
            return Err(Error::Cfl { dt, limit: b.cfl_limit(System::Full) });
        }
        let mut y = state_vec(b);
        y.extend(lin_vec(l));
        let y1 = rk4_advance(&y, dt, |yy| {
            let st = stage_state(b, &yy[..d1])?;
            let (a, v) = crate::dynamics::rhs(&st)?;
            let lin = LinState { s: Field::from_components(*st.grid(), vec![yy[d1].clone()])?, w: Field::from_components(*st.grid(), yy[d1 + 1..].to_vec())? };
            let (ds, dw) = lin_rhs(&lin, &st)?;
            let mut o = vec![a.comp(0).to_vec()];
            o.extend(v.into_components());
            o.push(ds.comp(0).to_vec());
            o.extend(dw.into_components());
            Ok(o)
        })?;
        let g = *b.grid();
        let nb = b.evolved(
            Field::from_components(g, vec![y1[0].clone()])?,
            Field::from_components(g, y1[1..d1].to_vec())?,
            b.t() + dt,
        )?;
        let nl = lin_from(&y1[d1..], &nb)?;
        out.push((nb, nl));
    }
    Ok(out)
}

/// Time series of a linearized energy run and the fitted constant.
#[derive(Debug, Clone, PartialEq)]
pub struct LinGronwall {
    pub t: Vec<f64>,
    pub e_lin: Vec<f64>,
    pub b: Vec<f64>,
    /// Central-difference `d log E_lin / dt`; one-sided at the ends.
    pub dlog: Vec<f64>,
    /// `max_t |d log E_lin/dt| / B(t)`.
    pub c: f64,
}

/// Gronwall fit along co-evolved pairs.
pub fn lin_gronwall_pairs(pairs: &[(GoodState, LinState)]) -> Result<LinGronwall> {
    if pairs.len() < 3 {
        return Err(Error::InsufficientSnapshots { needed: 3, got: pairs.len() });
    }
    let mut t = Vec::new();
    let mut e = Vec::new();
    let mut b = Vec::new();
    for (bg, ls) in pairs {
        t.push(bg.t());
        e.push(e_lin(ls, bg)?);
        b.push(control_b(bg)?);
    }
    let m = t.len();
    let le: Vec<f64> = e.iter().map(|&x| libm::log(x.max(f64::MIN_POSITIVE))).collect();
    let dlog: Vec<f64> = (0..m)
        .map(|k| {
            let (a, z) = if k == 0 { (0, 1) } else if k == m - 1 { (m - 2, m - 1) } else { (k - 1, k + 1) };
            (le[z] - le[a]) / (t[z] - t[a])
        })
        .collect();
    let c = (0..m).map(|k| dlog[k].abs() / b[k].max(1e-300)).fold(0.0, f64::max);
    Ok(LinGronwall { t, e_lin: e, b, dlog, c })
}

/// Integrates the linearized flow along a stored background trajectory with
/// RK4; the mid-step background is the average of its neighbours.
pub fn lin_gronwall(traj: &[GoodState], init: &LinState) -> Result<LinGronwall> {
    if traj.len() < 3 {
        return Err(Error::InsufficientSnapshots { needed: 3, got: traj.len() });
    }
    crate::dynamics::check_uniform(traj)?;
    let mut pairs = vec![(traj[0].clone(), init.clone())];
    for win in traj.windows(2) {
        let (a, z) = (&win[0], &win[1]);
        let dt = z.t() - a.t();
        let mid_y: Vec<Vec<f64>> = state_vec(a)
            .iter()
            .zip(state_vec(z))
            .map(|(p, q)| p.iter().zip(q).map(|(x, y)| 0.5 * (x + y)).collect())
            .collect();
        let mid = stage_state(a, &mid_y)?;
        let end = stage_state(a, &state_vec(z))?;
        let stages = [a, &mid, &mid, &end];
        let mut calls = 0;
        let l = &pairs.last().unwrap().1;
        let y1 = rk4_advance(&lin_vec(l), dt, |yy| {
            let st = stages[calls.min(3)];
            calls += 1;
            let lin = LinState { s: Field::from_components(*st.grid(), vec![yy[0].clone()])?, w: Field::from_components(*st.grid(), yy[1..].to_vec())? };
            let (ds, dw) = lin_rhs(&lin, st)?;
            let mut o = vec![ds.comp(0).to_vec()];
            o.extend(dw.into_components());
            Ok(o)
        })?;
        let nl = lin_from(&y1, z)?;
        pairs.push((z.clone(), nl));
    }
    lin_gronwall_pairs(&pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Grid;
    use crate::dynamics::rhs;
    use crate::families::Family;
    use crate::goodvars::Params;

    fn blob(n: usize) -> GoodState {
        let g = Grid::new_1d(-1.5, 1.5, n).unwrap();
        Family::Blob1d { h0: 0.06, alpha: 0.3, beta: 0.1 }.state(Params::default(), g).unwrap()
    }

    #[test]
    fn zero_maps_to_zero() {
        let bg = blob(128);
        let (a, b) = lin_rhs(&LinState::zeros(&bg), &bg).unwrap();
        assert!(a.as_slice().iter().chain(b.as_slice()).all(|&x| x == 0.0));
        assert_eq!(e_lin(&LinState::zeros(&bg), &bg).unwrap(), 0.0);
    }

    #[test]
    fn hand_reduced_constant_background() {
        // r ≡ r₀, v ≡ 0: ∂_t s = −r₀κ⟨r₀⟩^{-1/κ} w', ∂_t w = −⟨r₀⟩^{1/κ} s'.
        let kap = 2.0;
        let r0 = 0.4;
        let g = Grid::new_1d(-1.0, 1.0, 201).unwrap();
        let p = Params::new(kap, 1).unwrap();
        let bg = GoodState::patch(p, Field::scalar_from_fn(g, |_| r0), Field::zeros(g, 1), 0.0).unwrap();
        let ls = LinState::new(
            Field::scalar_from_fn(g, |x| (2.0 * x[0]).sin()),
            Field::scalar_from_fn(g, |x| (1.5 * x[0]).cos()),
            &bg,
        )
        .unwrap();
        let (ds, dw) = lin_rhs(&ls, &bg).unwrap();
        let rb = 1.0 + kap * r0 / (kap + 1.0);
        let inner = bg.interior(3);
        for k in 0..g.len() {
            if !inner[k] {
                continue;
            }
            let x = g.x(k)[0];
            let es = -r0 * kap * rb.powf(-1.0 / kap) * (-1.5 * (1.5 * x).sin());
            let ew = -rb.powf(1.0 / kap) * 2.0 * (2.0 * x).cos();
            assert!((ds.get(k, 0) - es).abs() < 1e-7, "{} {es}", ds.get(k, 0));
            assert!((dw.get(k, 0) - ew).abs() < 1e-7);
        }
    }

    fn directional_error(bg: &GoodState, ls: &LinState, delta: f64) -> f64 {
        let pert = GoodState::new(
            *bg.params(),
            bg.r().axpy(delta, &ls.s).unwrap(),
            bg.v().axpy(delta, &ls.w).unwrap(),
            0.0,
        )
        .unwrap();
        let (a0, b0) = rhs(bg).unwrap();
        let (a1, b1) = rhs(&pert).unwrap();
        let (ls_, lw) = lin_rhs(ls, bg).unwrap();
        let inner = bg.interior(5);
        let mut worst: f64 = 0.0;
        for k in 0..bg.grid().len() {
            if !inner[k] {
                continue;
            }
            worst = worst.max(((a1.get(k, 0) - a0.get(k, 0)) / delta - ls_.get(k, 0)).abs());
            for c in 0..bg.grid().dim() {
                worst = worst.max(((b1.get(k, c) - b0.get(k, c)) / delta - lw.get(k, c)).abs());
            }
        }
        worst
    }

    #[test]
    fn linearization_consistent_first_order_1d() {
        let bg = blob(257);
        let g = *bg.grid();
        // s = r·φ keeps the boundary fixed.
        let ls = LinState::new(
            Field::scalar_from_fn(g, |x| 0.06 * (1.0 - x[0] * x[0]) * (1.0 + (2.0 * x[0]).cos())),
            Field::scalar_from_fn(g, |x| (1.3 * x[0]).sin()),
            &bg,
        )
        .unwrap();
        let e1 = directional_error(&bg, &ls, 1e-3);
        let e2 = directional_error(&bg, &ls, 5e-4);
        assert!(e1 < 1e-2, "{e1}");
        assert!((e1 / e2 - 2.0).abs() < 0.2, "{e1} {e2}");
    }

    #[test]
    fn linearization_consistent_2d_patch() {
        let g = Grid::new_2d([-1.0, -1.0], [1.0, 1.0], [40, 40]).unwrap();
        let p = Params::new(1.5, 2).unwrap();
        let bg = GoodState::patch(
            p,
            Field::scalar_from_fn(g, |x| 0.3 + 0.1 * x[0] - 0.05 * x[1] * x[1]),
            Field::vector_from_fn(g, |x| [0.2 * x[1] + 0.1, 0.3 * x[0] * x[0] - 0.1]),
            0.0,
        )
        .unwrap();
        let ls = LinState::new(
            Field::scalar_from_fn(g, |x| (x[0] + 2.0 * x[1]).cos()),
            Field::vector_from_fn(g, |x| [(x[1]).sin(), (0.5 * x[0]).cos()]),
            &bg,
        )
        .unwrap();
        let e1 = directional_error(&bg, &ls, 1e-4);
        let e2 = directional_error(&bg, &ls, 5e-5);
        assert!((e1 / e2 - 2.0).abs() < 0.2, "{e1} {e2}");
    }

    #[test]
    fn energy_is_h_norm_and_quadratic() {
        let bg = blob(200);
        let g = *bg.grid();
        let ls = LinState::new(Field::scalar_from_fn(g, |x| x[0]), Field::scalar_from_fn(g, |x| 1.0 + x[0]), &bg).unwrap();
        let e = e_lin(&ls, &bg).unwrap();
        assert_eq!(e, norm_h_sq(&ls.s, &ls.w, &bg).unwrap());
        let scaled = LinState { s: ls.s.scaled(3.0), w: ls.w.scaled(3.0) };
        assert!((e_lin(&scaled, &bg).unwrap() / e - 9.0).abs() < 1e-12);
        let pure_s = LinState { s: ls.s.clone(), w: Field::zeros(g, 1) };
        let direct = crate::spaces::weighted_sq(&g, bg.r().comp(0), &[ls.s.comp(0)], 0.0);
        assert!((e_lin(&pure_s, &bg).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn zero_data_stays_zero_and_frozen_background_is_tame() {
        let bg = blob(128);
        let run = co_evolve(&bg, &LinState::zeros(&bg), 0.05, 0.01).unwrap();
        assert!(run.iter().all(|(_, l)| l.s.as_slice().iter().chain(l.w.as_slice()).all(|&x| x == 0.0)));
        let g = *bg.grid();
        let rest = Family::Blob1d { h0: 0.06, alpha: 0.0, beta: 0.0 }.state(Params::default(), g).unwrap();
        let dt = 0.9 * rest.cfl_limit(System::Full);
        let frozen: Vec<GoodState> = (0..40).map(|k| rest.clone().with_time(k as f64 * dt)).collect();
        let init = LinState::new(
            Field::scalar_from_fn(g, |x| 0.06 * (1.0 - x[0] * x[0]) * (3.0 * x[0]).cos()),
            Field::zeros(g, 1),
            &rest,
        )
        .unwrap();
        let fit = lin_gronwall(&frozen, &init).unwrap();
        assert!(fit.c.is_finite());
        let e0 = fit.e_lin[0];
        assert!(fit.e_lin.iter().all(|&e| (e / e0 - 1.0).abs() < 0.05), "{:?}", fit.e_lin);
        assert!(lin_gronwall(&frozen[..2], &init).is_err());
    }
}

//! Regularize / transport / Newton time stepping with an energy guard.
//!
//! One step of size `ε`: mollify with a kernel of width
//! `w(x) = max(c₁ ε (r/r_max)^{1/2}, c₂ ε²)`, move every support node to
//! `x + ε v/v⁰`, correct the carried values by the Newton bracket and
//! resample onto the grid. Stepping is one-dimensional.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{resample, Field};
use crate::dynamics::GoodState;
use crate::energy::{energy_report, snapshot_window, EnergyReport};
use crate::math::{exp, sqrt};
use crate::{Error, Result};

/// Interior depth (in nodes) over which defects are measured.
pub const DEFECT_DEPTH: usize = 5;
/// Roundoff allowance of the energy guard.
pub const GUARD_SLACK: f64 = 1e-10;
/// Longest run in steps.
pub const MAX_STEPS: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub c1: f64,
    pub c2: f64,
    /// Steps with `growth − 1 > c_max ε` are rejected.
    pub c_max: f64,
    /// Energy level `2k` used by the guard.
    pub level: usize,
    /// Snapshot spacing for energies at positive level, as a fraction of the CFL step.
    pub window_frac: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig { c1: 1.0, c2: 1.0, c_max: 50.0, level: 0, window_frac: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub epsilon: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    pub growth_factor: f64,
    /// Max-norm defect of the approximate-solution identities on the interior.
    pub local_residual: f64,
    /// Largest displacement of a boundary point.
    pub boundary_shift: f64,
    /// The regularization was skipped because its kernel is below grid scale.
    pub regularization_noop: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regularized {
    pub state: GoodState,
    pub noop: bool,
    /// Nodes whose kernel was resolved and actually smoothed.
    pub smoothed: usize,
    pub width_max: f64,
}

/// Kernel width at each node.
pub fn kernel_width(state: &GoodState, eps: f64, cfg: &StepConfig) -> Vec<f64> {
    let r = state.r().comp(0);
    let rmax = r.iter().cloned().fold(0.0, f64::max).max(1e-300);
    r.iter().map(|&x| (cfg.c1 * eps * sqrt(x.max(0.0) / rmax)).max(cfg.c2 * eps * eps)).collect()
}

/// Moment-corrected Gaussian smoothing of `(r, v)`; nodes whose width is below
/// `2h` keep their values.
pub fn regularize(state: &GoodState, eps: f64, cfg: &StepConfig) -> Result<Regularized> {
    let g = *state.grid();
    if g.dim() != 1 {
        return Err(Error::Unsupported("regularization is one-dimensional"));
    }
    let h = g.h(0);
    let width = kernel_width(state, eps, cfg);
    let support = &state.mask().support;
    let width_max = (0..g.len()).filter(|&k| support[k]).map(|k| width[k]).fold(0.0, f64::max);
    if width_max < 2.0 * h {
        return Ok(Regularized { state: state.clone(), noop: true, smoothed: 0, width_max });
    }
    let comps = 1 + state.v().ncomp();
    let src: Vec<&[f64]> = core::iter::once(state.r().comp(0)).chain((0..comps - 1).map(|c| state.v().comp(c))).collect();
    let mut out: Vec<Vec<f64>> = src.iter().map(|c| c.to_vec()).collect();
    let mut smoothed = 0;
    for k in 0..g.len() {
        let w = width[k];
        if !state.mask().inside[k] || w < 2.0 * h {
            continue;
        }
        let reach = libm::ceil(4.0 * w / h) as isize;
        let lo = (k as isize - reach).max(0) as usize;
        let hi = ((k as isize + reach) as usize).min(g.len() - 1);
        let idx: Vec<usize> = (lo..=hi).filter(|&j| support[j]).collect();
        let d: Vec<f64> = idx.iter().map(|&j| (j as f64 - k as f64) * h).collect();
        let gk: Vec<f64> = d.iter().map(|x| exp(-x * x / (2.0 * w * w))).collect();
        let (m1, m2): (f64, f64) = d.iter().zip(&gk).fold((0.0, 0.0), |(a, b), (x, gg)| (a + gg * x, b + gg * x * x));
        let beta = -m1 / m2;
        let kw: Vec<f64> = d.iter().zip(&gk).map(|(x, gg)| gg * (1.0 + beta * x)).collect();
        let norm: f64 = kw.iter().sum();
        for (o, s) in out.iter_mut().zip(&src) {
            o[k] = idx.iter().zip(&kw).map(|(&j, kk)| kk * s[j]).sum::<f64>() / norm;
        }
        smoothed += 1;
    }
    let r = Field::from_components(g, vec![out.remove(0)])?;
    let v = Field::from_components(g, out)?;
    Ok(Regularized { state: state.evolved(r, v, state.t())?, noop: false, smoothed, width_max })
}

/// Support nodes carried to `x + ε v/v⁰` with their `(r, v)` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Scattered {
    pub points: Vec<f64>,
    pub nodes: Vec<usize>,
    pub values: Vec<Vec<f64>>,
}

pub fn transport(state: &GoodState, eps: f64) -> Result<Scattered> {
    let g = *state.grid();
    if g.dim() != 1 {
        return Err(Error::Unsupported("transport is one-dimensional"));
    }
    let width = g.hi()[0] - g.lo()[0];
    let nodes: Vec<usize> = (0..g.len()).filter(|&k| state.mask().support[k]).collect();
    let mut points = Vec::with_capacity(nodes.len());
    for &k in &nodes {
        let shift = eps * state.v().get(k, 0) / state.coeffs(k).v0;
        if shift.abs() > 0.5 * width {
            return Err(Error::Domain { what: "transport displacement", value: shift });
        }
        points.push(g.x(k)[0] + shift);
    }
    for i in 1..points.len() {
        if !(points[i] > points[i - 1]) {
            return Err(Error::FoldOver { index: i - 1 });
        }
    }
    let values = vec![
        nodes.iter().map(|&k| state.r().get(k, 0)).collect(),
        nodes.iter().map(|&k| state.v().get(k, 0)).collect(),
    ];
    Ok(Scattered { points, nodes, values })
}

/// `ř = r − ε[rG∂v + r a₁ v ∂r]`, `v̌ = v − ε a₂ ∂r`, brackets from `source`.
pub fn newton_correct(sc: &Scattered, source: &GoodState, eps: f64) -> Scattered {
    let dfn = source.differ();
    let dr = dfn.d(source.r().comp(0), 0);
    let dv = dfn.d(source.v().comp(0), 0);
    let mut out = sc.clone();
    for (i, &k) in sc.nodes.iter().enumerate() {
        let c = source.coeffs(k);
        let r = source.r().get(k, 0);
        let v = source.v().get(k, 0);
        out.values[0][i] -= eps * (r * c.g[0][0] * dv[k] + r * c.a1 * v * dr[k]);
        out.values[1][i] -= eps * c.a2 * dr[k];
    }
    out
}

fn resample_state(sc: &Scattered, like: &GoodState, t: f64) -> Result<GoodState> {
    let g = *like.grid();
    let vals: Vec<&[f64]> = sc.values.iter().map(|v| v.as_slice()).collect();
    let rs = resample(&g, &sc.points, &vals)?;
    let mut comps = rs.values;
    for (k, &cov) in rs.covered.iter().enumerate() {
        if !cov && comps[0][k] > 0.0 {
            return Err(Error::CoverageGap { node: k });
        }
    }
    let v = comps.split_off(1);
    like.evolved(Field::from_components(g, comps)?, Field::from_components(g, v)?, t)
}

/// Max-norm defect of `ř − r̊ − ε ∂_t r̊`, `v̌ − v̊ − ε ∂_t v̊` on the interior
/// of `before`, with `∂_t` the right-hand side of the full system.
pub fn step_defect(before: &GoodState, after: &GoodState, eps: f64) -> Result<f64> {
    let (dr, dv) = crate::dynamics::rhs(before)?;
    let inner = before.interior(DEFECT_DEPTH);
    let mut m: f64 = 0.0;
    for k in 0..before.grid().len() {
        if !inner[k] || !after.mask().inside[k] {
            continue;
        }
        m = m.max((after.r().get(k, 0) - before.r().get(k, 0) - eps * dr.get(k, 0)).abs());
        for c in 0..before.v().ncomp() {
            m = m.max((after.v().get(k, c) - before.v().get(k, c) - eps * dv.get(k, c)).abs());
        }
    }
    Ok(m)
}

/// `E^{level}` of a state; positive levels use an RK4 snapshot window.
pub fn level_energy(state: &GoodState, cfg: &StepConfig) -> Result<EnergyReport> {
    let k = cfg.level / 2;
    if k == 0 {
        return energy_report(core::slice::from_ref(state), 0);
    }
    let dtau = cfg.window_frac * state.cfl_limit(crate::dynamics::System::Full);
    energy_report(&snapshot_window(state, k, dtau)?, k)
}

fn roots(s: &GoodState) -> Vec<f64> {
    s.boundary().map(|b| b.roots()).unwrap_or_default()
}

/// Regularize, transport, Newton-correct and resample, without the guard.
pub fn advance(state: &GoodState, eps: f64, cfg: &StepConfig) -> Result<(GoodState, bool)> {
    let reg = regularize(state, eps, cfg)?;
    let sc = transport(&reg.state, eps)?;
    let sc = newton_correct(&sc, &reg.state, eps);
    Ok((resample_state(&sc, state, state.t() + eps)?, reg.noop))
}

pub fn one_step(state: &GoodState, eps: f64, cfg: &StepConfig) -> Result<(GoodState, StepReport)> {
    let before = level_energy(state, cfg)?.e_total;
    one_step_from(state, eps, cfg, before).map(|(s, r, _)| (s, r))
}

fn one_step_from(state: &GoodState, eps: f64, cfg: &StepConfig, before: f64) -> Result<(GoodState, StepReport, EnergyReport)> {
    let (next, noop) = advance(state, eps, cfg)?;
    let er = level_energy(&next, cfg)?;
    let (r0, r1) = (roots(state), roots(&next));
    let shift = if r0.len() == r1.len() { r0.iter().zip(&r1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) } else { f64::INFINITY };
    let report = StepReport {
        epsilon: eps,
        energy_before: before,
        energy_after: er.e_total,
        growth_factor: er.e_total / before,
        local_residual: step_defect(state, &next, eps)?,
        boundary_shift: shift,
        regularization_noop: noop,
    };
    if report.growth_factor - 1.0 > cfg.c_max * eps + GUARD_SLACK {
        return Err(Error::StepRejected(Box::new(report)));
    }
    Ok((next, report, er))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub states: Vec<GoodState>,
    pub reports: Vec<StepReport>,
    /// Energy diagnostics of every state.
    pub energies: Vec<EnergyReport>,
    /// Why the run stopped before `T`.
    pub halted: Option<Error>,
}

/// Steps of size `ε` (the last one shortened to land on `T`).
pub fn run(state: &GoodState, t_end: f64, eps: f64, cfg: &StepConfig) -> Result<Run> {
    if !(eps > 0.0) || !(t_end >= state.t()) {
        return Err(Error::InvalidParams("need eps > 0 and T >= t0"));
    }
    let span = t_end - state.t();
    if span / eps > MAX_STEPS {
        return Err(Error::InvalidParams("more than 1e5 steps"));
    }
    let steps = libm::ceil(span / eps - 1e-9) as usize;
    let first = level_energy(state, cfg)?;
    let mut out = Run { states: vec![state.clone()], reports: Vec::new(), energies: vec![first], halted: None };
    for j in 0..steps {
        let cur = out.states.last().unwrap();
        let dt = if j + 1 == steps { t_end - cur.t() } else { eps };
        let before = out.energies.last().unwrap().e_total;
        match one_step_from(cur, dt, cfg, before) {
            Ok((s, rep, er)) => {
                out.states.push(s);
                out.reports.push(rep);
                out.energies.push(er);
            }
            Err(e) => {
                out.halted = Some(e);
                break;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Grid;
    use crate::dynamics::{rk4_run, System};
    use crate::families::Family;
    use crate::goodvars::Params;

    fn blob(n: usize, alpha: f64, beta: f64) -> GoodState {
        let g = Grid::new_1d(-1.5, 1.5, n).unwrap();
        Family::Blob1d { h0: 0.06, alpha, beta }.state(Params::default(), g).unwrap()
    }

    #[test]
    fn zero_step_is_identity() {
        let st = blob(257, 0.08, 0.0);
        let (next, rep) = one_step(&st, 0.0, &StepConfig::default()).unwrap();
        assert!(rep.regularization_noop);
        let inside = &st.mask().inside;
        assert_eq!(&next.mask().inside, inside);
        for k in (0..inside.len()).filter(|&k| inside[k]) {
            assert!((next.r().get(k, 0) - st.r().get(k, 0)).abs() < 1e-15);
            assert!((next.v().get(k, 0) - st.v().get(k, 0)).abs() < 1e-15);
        }
        assert!((rep.growth_factor - 1.0).abs() < 1e-11);
    }

    #[test]
    fn rigid_translation() {
        // Constant v on a flat patch: v/v⁰ is constant and r is untouched by Newton.
        let g = Grid::new_1d(-1.0, 1.0, 129).unwrap();
        let st = GoodState::patch(Params::default(), Field::scalar_from_fn(g, |_| 0.2), Field::scalar_from_fn(g, |_| 0.3), 0.0).unwrap();
        let sc = transport(&st, 0.01).unwrap();
        let q = 0.3 / st.coeffs(0).v0;
        for (i, &k) in sc.nodes.iter().enumerate() {
            assert!((sc.points[i] - g.x(k)[0] - 0.01 * q).abs() < 1e-15);
        }
        let nc = newton_correct(&sc, &st, 0.01);
        assert_eq!(nc.values, sc.values);
    }

    #[test]
    fn quadratic_smoothing_moment_oracle() {
        // Gaussian second moment: a quadratic drops by h₀ w(x)² where the kernel acts.
        let st = blob(1025, 0.0, 0.0);
        let cfg = StepConfig::default();
        let eps = 0.05;
        let reg = regularize(&st, eps, &cfg).unwrap();
        assert!(!reg.noop && reg.smoothed > 100);
        let w = kernel_width(&st, eps, &cfg);
        let inner = st.interior(30);
        for k in 0..st.grid().len() {
            if inner[k] && w[k] > 4.0 * st.grid().h(0) {
                let got = reg.state.r().get(k, 0) - st.r().get(k, 0);
                let want = -0.06 * w[k] * w[k];
                assert!((got / want - 1.0).abs() < 0.02, "{got} {want}");
            }
        }
    }

    #[test]
    fn fold_over_detected() {
        let g = Grid::new_1d(-1.0, 1.0, 129).unwrap();
        let st = GoodState::patch(Params::default(), Field::scalar_from_fn(g, |_| 0.2), Field::scalar_from_fn(g, |x| -30.0 * x[0]), 0.0).unwrap();
        assert!(matches!(transport(&st, 0.1), Err(Error::FoldOver { .. })));
    }

    #[test]
    fn local_defect_is_second_order() {
        let st = blob(513, 0.3, 0.1);
        let cfg = StepConfig::default();
        let d: Vec<f64> = [0.008, 0.004, 0.002].iter().map(|&e| one_step(&st, e, &cfg).unwrap().1.local_residual).collect();
        assert!(d[0] / d[1] > 3.4 && d[1] / d[2] > 3.4, "{d:?}");
    }

    #[test]
    fn steady_patch_stays() {
        let g = Grid::new_1d(-1.0, 1.0, 64).unwrap();
        let st = GoodState::patch(Params::default(), Field::scalar_from_fn(g, |_| 0.3), Field::zeros(g, 1), 0.0).unwrap();
        let run = run(&st, 0.05, 0.01, &StepConfig::default()).unwrap();
        assert!(run.halted.is_none());
        assert_eq!(run.states.len(), 6);
        assert!(run.states.last().unwrap().r().comp(0).iter().all(|&x| (x - 0.3).abs() < 1e-14));
    }

    #[test]
    fn global_first_order_against_rk4() {
        let st = blob(257, 0.08, 0.0);
        let t = 0.1;
        let refs = rk4_run(&st, t, 1e-3, System::Full).unwrap();
        let exact = refs.last().unwrap();
        let inner = exact.interior(DEFECT_DEPTH);
        let dev: Vec<f64> = [0.01, 0.005]
            .iter()
            .map(|&e| {
                let r = run(&st, t, e, &StepConfig::default()).unwrap();
                assert!(r.halted.is_none(), "{:?}", r.halted);
                let end = r.states.last().unwrap();
                (0..inner.len()).filter(|&k| inner[k]).map(|k| (end.v().get(k, 0) - exact.v().get(k, 0)).abs().max((end.r().get(k, 0) - exact.r().get(k, 0)).abs())).fold(0.0, f64::max)
            })
            .collect();
        let ratio = dev[0] / dev[1];
        assert!(ratio > 1.7 && ratio < 2.3, "{dev:?}");
    }
}

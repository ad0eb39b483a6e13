//! Good variables `(s_j, w_j)`, the wave/transport/total energies and the
//! monitors built on them.
//!
//! Material derivatives `D_t = ∂_t + (v/v⁰)·∂` are taken from a window of
//! equally spaced snapshots: each node of the centre snapshot is traced along
//! `dx/dt = v/v⁰` (RK4, velocity interpolated in space and time) to every
//! snapshot time, the observable is interpolated at the foot points, and the
//! samples are differentiated in time with Fornberg weights.

use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{integrate, interp_at, Field, Grid};
use crate::dynamics::{check_uniform, rk4_step_with, vorticity_of, GoodState, System};
use crate::math::log;
use crate::spaces::{control_norms, norm_h2k, norm_h_sq, norm_hj_sigma, NormSpec};
use crate::stencil::{fornberg, multi_indices};
use crate::{Error, Result};

/// Coercivity and Gronwall checks refuse states with a larger `A`.
pub const A_BUDGET: f64 = 0.2;

/// `2k₀ = d + 1 + 1/κ`, the critical regularity level.
pub fn critical_level(d: usize, kappa: f64) -> f64 {
    d as f64 + 1.0 + 1.0 / kappa
}

fn centre(traj: &[GoodState], k: usize) -> Result<usize> {
    let needed = k + 1 + (k % 2 == 1) as usize;
    let needed = needed.max(1);
    if traj.len() < needed || traj.len() % 2 == 0 {
        return Err(Error::InsufficientSnapshots { needed, got: traj.len() });
    }
    if traj.len() > 1 {
        check_uniform(traj)?;
    }
    Ok(traj.len() / 2)
}

/// `v/v⁰` at every node of a snapshot.
fn flow_field(s: &GoodState) -> Vec<Vec<f64>> {
    let g = s.grid();
    (0..g.dim())
        .map(|a| (0..g.len()).map(|n| s.v().get(n, a) / s.coeffs(n).v0).collect())
        .collect()
}

/// Foot points of the centre-snapshot support nodes at every snapshot time.
#[derive(Debug, Clone, PartialEq)]
pub struct Characteristics {
    pub centre: usize,
    /// `feet[node][j]`, `None` for nodes off the centre support or lost.
    pub feet: Vec<Option<Vec<[f64; 2]>>>,
    /// Fraction of centre support nodes whose characteristic stayed covered.
    pub coverage: f64,
}

fn near_support(s: &GoodState, x: [f64; 2]) -> bool {
    let g = s.grid();
    let mut ij = [0usize; 2];
    for a in 0..g.dim() {
        let t = libm::round((x[a] - g.lo()[a]) / g.h(a));
        if t < 0.0 || t as usize >= g.n()[a] {
            return false;
        }
        ij[a] = t as usize;
    }
    s.mask().support[g.index(ij[0], ij[1])]
}

pub fn trace(traj: &[GoodState]) -> Result<Characteristics> {
    let c = centre(traj, 0)?;
    let g = *traj[c].grid();
    let d = g.dim();
    let m = traj.len();
    let q: Vec<Vec<Vec<f64>>> = traj.iter().map(flow_field).collect();
    let times: Vec<f64> = traj.iter().map(|s| s.t()).collect();
    // Velocity at (x, t): cubic (or lower) Lagrange in time over the nearest snapshots.
    let vel = |x: [f64; 2], t: f64| -> Option<[f64; 2]> {
        let dt = if m > 1 { times[1] - times[0] } else { 1.0 };
        let pos = ((t - times[0]) / dt).clamp(0.0, (m - 1) as f64);
        let w = m.min(4);
        let lo = (libm::floor(pos) as isize - (w as isize / 2 - 1)).clamp(0, (m - w) as isize) as usize;
        let ts = &times[lo..lo + w];
        let wt = fornberg(t, ts, 0);
        let mut out = [0.0; 2];
        for (k, &wk) in wt.iter().enumerate() {
            for a in 0..d {
                out[a] += wk * interp_at(&g, &q[lo + k][a], x)?;
            }
        }
        Some(out)
    };
    let rk4 = |x: [f64; 2], t: f64, h: f64| -> Option<[f64; 2]> {
        let add = |x: [f64; 2], k: [f64; 2], s: f64| [x[0] + s * k[0], x[1] + s * k[1]];
        let k1 = vel(x, t)?;
        let k2 = vel(add(x, k1, 0.5 * h), t + 0.5 * h)?;
        let k3 = vel(add(x, k2, 0.5 * h), t + 0.5 * h)?;
        let k4 = vel(add(x, k3, h), t + h)?;
        let mut y = x;
        for a in 0..d {
            y[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        }
        Some(y)
    };
    let support = &traj[c].mask().support;
    let mut feet = vec![None; g.len()];
    let (mut total, mut ok) = (0usize, 0usize);
    for node in 0..g.len() {
        if !support[node] {
            continue;
        }
        total += 1;
        let mut pts = vec![[0.0; 2]; m];
        pts[c] = g.x(node);
        let mut good = true;
        for j in c..m - 1 {
            match rk4(pts[j], times[j], times[j + 1] - times[j]) {
                Some(y) if near_support(&traj[j + 1], y) => pts[j + 1] = y,
                _ => {
                    good = false;
                    break;
                }
            }
        }
        for j in (1..=c).rev() {
            if !good {
                break;
            }
            match rk4(pts[j], times[j], times[j - 1] - times[j]) {
                Some(y) if near_support(&traj[j - 1], y) => pts[j - 1] = y,
                _ => good = false,
            }
        }
        if good {
            ok += 1;
            feet[node] = Some(pts);
        }
    }
    Ok(Characteristics { centre: c, feet, coverage: if total > 0 { ok as f64 / total as f64 } else { 0.0 } })
}

/// `D_t^k` of a scalar observable given on every snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialPower {
    pub value: Field,
    pub valid: Vec<bool>,
    pub coverage: f64,
}

fn power_from(ch: &Characteristics, traj: &[GoodState], fields: &[&[f64]], k: usize) -> Result<MaterialPower> {
    let c = ch.centre;
    let g = *traj[c].grid();
    let times: Vec<f64> = traj.iter().map(|s| s.t()).collect();
    let wts = fornberg(times[c], &times, k);
    let mut value = Field::zeros(g, 1);
    let mut valid = vec![false; g.len()];
    for (node, feet) in ch.feet.iter().enumerate() {
        let Some(feet) = feet else { continue };
        let mut acc = 0.0;
        let mut good = true;
        for (j, &w) in wts.iter().enumerate() {
            match interp_at(&g, fields[j], feet[j]) {
                Some(f) => acc += w * f,
                None => {
                    good = false;
                    break;
                }
            }
        }
        if good {
            value.set(node, 0, acc);
            valid[node] = true;
        }
    }
    Ok(MaterialPower { value, valid, coverage: ch.coverage })
}

/// `D_t^k f` at the centre snapshot; `fields[j]` is `f` at snapshot `j`.
pub fn material_power(fields: &[Field], traj: &[GoodState], k: usize) -> Result<MaterialPower> {
    if fields.len() != traj.len() {
        return Err(Error::Mismatch);
    }
    centre(traj, k)?;
    if k == 0 {
        let c = traj.len() / 2;
        let valid = traj[c].mask().support.clone();
        return Ok(MaterialPower { value: fields[c].clone(), valid, coverage: 1.0 });
    }
    let ch = trace(traj)?;
    let f: Vec<&[f64]> = fields.iter().map(|f| f.comp(0)).collect();
    power_from(&ch, traj, &f, k)
}

/// One term `r^a ∂^α ω` of the vorticity list.
#[derive(Debug, Clone, PartialEq)]
pub struct VorticityTerm {
    pub a: usize,
    pub alpha: [usize; 2],
    pub field: Field,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodDerivedVars {
    /// Half the energy level: variables run over `j = 0..=2k`.
    pub k: usize,
    pub s: Vec<Field>,
    pub w: Vec<Field>,
    pub omega: Vec<VorticityTerm>,
    pub valid: Vec<bool>,
    pub coverage: f64,
}

/// `∂_t` at fixed nodes from the snapshots.
fn time_derivative(traj: &[GoodState], comp: impl Fn(&GoodState) -> &[f64]) -> Vec<f64> {
    let c = traj.len() / 2;
    let times: Vec<f64> = traj.iter().map(|s| s.t()).collect();
    let w = fornberg(times[c], &times, 1);
    let n = traj[c].grid().len();
    (0..n).map(|k| traj.iter().zip(&w).map(|(s, wj)| wj * comp(s)[k]).sum()).collect()
}

/// Good variables at the centre snapshot, up to index `2k` (`k ≤ 2`).
pub fn good_vars(traj: &[GoodState], k: usize) -> Result<GoodDerivedVars> {
    if k > 2 {
        return Err(Error::Unsupported("good variables above level 4"));
    }
    let top = 2 * k;
    let c = centre(traj, top)?;
    let st = &traj[c];
    let g = *st.grid();
    let (d, n) = (g.dim(), g.len());
    let mut s = vec![st.r().clone()];
    let mut w = vec![st.v().clone()];
    let mut valid = st.mask().support.clone();
    let mut coverage = 1.0;
    if top >= 1 {
        let ch = trace(traj)?;
        coverage = ch.coverage;
        let rs: Vec<&[f64]> = traj.iter().map(|x| x.r().comp(0)).collect();
        let vs: Vec<Vec<&[f64]>> = (0..d).map(|a| traj.iter().map(|x| x.v().comp(a)).collect()).collect();
        let dr = st.differ().grad(st.r().comp(0));
        // D_t^j r and D_t^j v for j = 1..=top.
        let mut dtr = Vec::new();
        let mut dtv: Vec<Vec<Vec<f64>>> = Vec::new();
        for j in 1..=top {
            let p = power_from(&ch, traj, &rs, j)?;
            for node in 0..n {
                valid[node] &= p.valid[node];
            }
            dtr.push(p.value.comp(0).to_vec());
            let mut comps = Vec::new();
            for comp in vs.iter() {
                let p = power_from(&ch, traj, comp, j)?;
                for node in 0..n {
                    valid[node] &= p.valid[node];
                }
                comps.push(p.value.comp(0).to_vec());
            }
            dtv.push(comps);
        }
        // s₁ = ∂_t r, w₁ = ∂_t v.
        s.push(Field::from_components(g, vec![time_derivative(traj, |x| x.r().comp(0))])?);
        let w1 = (0..d).map(|a| time_derivative(traj, |x| x.v().comp(a))).collect();
        w.push(Field::from_components(g, w1)?);
        let kap = st.params().kappa;
        for j in 2..=top {
            let mut sj = dtr[j - 1].clone();
            for node in 0..n {
                let cb = st.coeffs(node);
                let pre = cb.a0 / (kap * cb.r_bracket);
                let mut q = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        q += if j == 2 {
                            0.5 * pre * cb.a2 * cb.g[a][b] * dr[a][node] * dr[b][node]
                        } else {
                            -pre * cb.g[a][b] * dr[a][node] * dtv[j - 2][b][node]
                        };
                    }
                }
                sj[node] += q;
            }
            s.push(Field::from_components(g, vec![sj])?);
            w.push(Field::from_components(g, dtv[j - 1].clone())?);
        }
    }
    let mut omega = Vec::new();
    if d == 2 && k >= 1 {
        let om = vorticity_of(st.v()).w12;
        let dfn = st.differ();
        for b in (k - 1)..=(2 * k - 1) {
            for alpha in multi_indices(2, b) {
                let a = b + 1 - k;
                let da = dfn.partial(om.comp(0), alpha);
                let f: Vec<f64> = (0..n).map(|i| crate::math::pow(st.r().get(i, 0).max(0.0), a as f64) * da[i]).collect();
                omega.push(VorticityTerm { a, alpha, field: Field::from_components(g, vec![f])? });
            }
        }
    }
    Ok(GoodDerivedVars { k, s, w, omega, valid, coverage })
}

/// `Σ_{j≤k} ‖(s_{2j}, w_{2j})‖²_ℋ`.
pub fn e_wave(traj: &[GoodState], k: usize) -> Result<f64> {
    let gv = good_vars(traj, k)?;
    e_wave_of(&gv, &traj[traj.len() / 2])
}

fn e_wave_of(gv: &GoodDerivedVars, st: &GoodState) -> Result<f64> {
    let mut e = 0.0;
    for j in 0..=gv.k {
        e += norm_h_sq(&gv.s[2 * j], &gv.w[2 * j], st)?;
    }
    Ok(e)
}

/// `‖ω‖²_{H^{2k−1, k+1/κ}}`; zero in one dimension and at level 0.
pub fn e_transport(state: &GoodState, k: usize) -> Result<f64> {
    if state.grid().dim() == 1 || k == 0 {
        return Ok(0.0);
    }
    let om = vorticity_of(state.v()).w12;
    let spec = NormSpec::new(2 * k - 1, k as f64 + 1.0 / state.params().kappa)?;
    let v = norm_hj_sigma(&om, spec, state.r())?;
    Ok(v * v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub level: usize,
    pub t: f64,
    pub e_wave: f64,
    pub e_transport: f64,
    pub e_total: f64,
    /// `E_total / ‖(r, v)‖²_{ℋ^{2k}}`.
    pub coercivity_ratio: f64,
    pub a: f64,
    pub b: f64,
    pub coverage: f64,
}

pub fn energy_report(traj: &[GoodState], k: usize) -> Result<EnergyReport> {
    let gv = good_vars(traj, k)?;
    let st = &traj[traj.len() / 2];
    let ew = e_wave_of(&gv, st)?;
    let et = e_transport(st, k)?;
    let total = ew + et;
    let nrm = norm_h2k(st.r(), st.v(), k, st.r(), st.params())?;
    let cn = control_norms(st)?;
    Ok(EnergyReport {
        level: 2 * k,
        t: st.t(),
        e_wave: ew,
        e_transport: et,
        e_total: total,
        coercivity_ratio: total / (nrm * nrm),
        a: cn.a,
        b: cn.b,
        coverage: gv.coverage,
    })
}

/// `(E/‖·‖², ‖·‖²/E)`; refuses when `A` exceeds [`A_BUDGET`].
pub fn coercivity_ratio(traj: &[GoodState], k: usize) -> Result<(f64, f64)> {
    let rep = energy_report(traj, k)?;
    if rep.a > A_BUDGET {
        return Err(Error::ControlTooLarge { a: rep.a, limit: A_BUDGET });
    }
    Ok((rep.coercivity_ratio, 1.0 / rep.coercivity_ratio))
}

/// Snapshots `t − mΔτ, …, t + mΔτ` around a state by RK4 sub-stepping.
pub fn snapshot_window(state: &GoodState, m: usize, dtau: f64) -> Result<Vec<GoodState>> {
    let mut back = vec![state.clone()];
    let mut fwd = vec![state.clone()];
    for (list, sign) in [(&mut back, -1.0), (&mut fwd, 1.0)] {
        for _ in 0..m {
            let cur = list.last().unwrap();
            let sub = libm::ceil(dtau / (0.9 * cur.cfl_limit(System::Full))).max(1.0) as usize;
            let mut s = cur.clone();
            for _ in 0..sub {
                s = rk4_step_with(&s, sign * dtau / sub as f64, System::Full)?;
            }
            let t = cur.t() + sign * dtau;
            list.push(s.with_time(t));
        }
    }
    back.reverse();
    back.pop();
    back.extend(fwd);
    Ok(back)
}

/// Energy reports along a uniformly stepped run; every `stride`-th state
/// with a full window of `2k+1` neighbours (spacing `spacing` steps).
pub fn energy_series(run: &[GoodState], k: usize, stride: usize, spacing: usize) -> Result<Vec<EnergyReport>> {
    let half = k * spacing.max(1);
    let mut out = Vec::new();
    let mut i = half;
    while i + half < run.len() {
        let win: Vec<GoodState> = (0..=2 * k).map(|j| run[i - half + j * spacing.max(1)].clone()).collect();
        out.push(energy_report(&win, k)?);
        i += stride.max(1);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallFit {
    /// Smallest `C` with `log E(t) − log E(t₀) ≤ C ∫ B` at every sample.
    pub c: f64,
    /// Least-squares slope of `log E(t) − log E(t₀)` against `∫ B`.
    pub slope: f64,
    pub int_b: Vec<f64>,
    pub log_growth: Vec<f64>,
}

/// Fits the Gronwall constant from `(t, E, B)` samples.
pub fn gronwall_monitor(reports: &[EnergyReport]) -> Result<GronwallFit> {
    if reports.len() < 2 {
        return Err(Error::InsufficientSnapshots { needed: 2, got: reports.len() });
    }
    let mut int_b = vec![0.0];
    for w in reports.windows(2) {
        let last = *int_b.last().unwrap();
        int_b.push(last + 0.5 * (w[0].b + w[1].b) * (w[1].t - w[0].t));
    }
    let l0 = log(reports[0].e_total);
    let lg: Vec<f64> = reports.iter().map(|r| log(r.e_total) - l0).collect();
    let mut c: f64 = 0.0;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in int_b.iter().zip(&lg).skip(1) {
        if *x > 0.0 {
            c = c.max(y / x);
            sxy += x * y;
            sxx += x * x;
        }
    }
    Ok(GronwallFit { c, slope: if sxx > 0.0 { sxy / sxx } else { 0.0 }, int_b, log_growth: lg })
}

/// Moving-domain differentiation formula for `∫_{Ω_t} f`:
/// `|d/dt ∫ f − ∫ (D_t f + f ∂_i(v^i/v⁰))|` at the centre of three snapshots.
pub fn leibniz_defect(traj: &[GoodState], fields: &[Field]) -> Result<f64> {
    if traj.len() != 3 || fields.len() != 3 {
        return Err(Error::InsufficientSnapshots { needed: 3, got: traj.len().min(fields.len()) });
    }
    check_uniform(traj)?;
    let integral = |s: &GoodState, f: &[f64]| -> f64 {
        integrate(s.grid(), s.r().comp(0), &[f], 0.0, |psi, v| if psi > 0.0 { v[0] } else { 0.0 })
    };
    let dt = traj[1].t() - traj[0].t();
    let lhs = (integral(&traj[2], fields[2].comp(0)) - integral(&traj[0], fields[0].comp(0))) / (2.0 * dt);
    let st = &traj[1];
    let dtf = material_power(fields, traj, 1)?;
    let g: &Grid = st.grid();
    let q = flow_field(st);
    let dfn = st.differ();
    let mut div = vec![0.0; g.len()];
    for (a, qa) in q.iter().enumerate() {
        for (dv, x) in div.iter_mut().zip(dfn.d(qa, a)) {
            *dv += x;
        }
    }
    let integrand: Vec<f64> = (0..g.len()).map(|k| dtf.value.get(k, 0) + fields[1].get(k, 0) * div[k]).collect();
    let rhs = integral(st, &integrand);
    Ok((lhs - rhs).abs())
}

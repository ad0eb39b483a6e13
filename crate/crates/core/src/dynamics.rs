//! The good-variable evolution equations on the ambient grid.

use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{extend, interp_at, locate_boundary, Boundary, Field, Grid, Mask};
use crate::goodvars::{
    coefficient_jet, coefficients_unchecked, from_good, CoefficientBundle, CoefficientJet, GoodPoint, Params, A0_MIN,
};
use crate::math::{abs, pow, sqrt};
use crate::stencil::Differ;
use crate::{Error, Result};

pub const C_CFL: f64 = 0.4;

/// Which right-hand side to evolve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum System {
    /// The full relativistic system in good variables.
    #[default]
    Full,
    /// `r_t + v·∇r + r div v = 0`, `v_t + v·∇v + ∇r = 0`: all coefficients frozen to one.
    LeadingOrder,
}

/// `(r, v)` on the ambient grid at time `t`.
///
/// `r` is a signed defining function of the fluid: positive inside, extended
/// past the boundary. A *patch* state treats every node as fluid; it exists
/// for interior consistency tests without a boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodState {
    params: Params,
    r: Field,
    v: Field,
    t: f64,
    mask: Mask,
    patch: bool,
}

impl GoodState {
    pub fn new(params: Params, r: Field, v: Field, t: f64) -> Result<Self> {
        let mask = Mask::from_r(r.comp(0), r.grid());
        Self::build(params, r, v, t, mask, false)
    }

    pub fn patch(params: Params, r: Field, v: Field, t: f64) -> Result<Self> {
        let mask = Mask::full(r.grid());
        Self::build(params, r, v, t, mask, true)
    }

    pub fn from_fn(
        params: Params,
        grid: Grid,
        r: impl Fn([f64; 2]) -> f64,
        v: impl Fn([f64; 2]) -> [f64; 2],
        t: f64,
    ) -> Result<Self> {
        Self::new(params, Field::scalar_from_fn(grid, r), Field::vector_from_fn(grid, v), t)
    }

    fn build(params: Params, r: Field, v: Field, t: f64, mask: Mask, patch: bool) -> Result<Self> {
        params.validate()?;
        let grid = *r.grid();
        if grid.dim() != params.dim || *v.grid() != grid || r.ncomp() != 1 || v.ncomp() != params.dim {
            return Err(Error::Mismatch);
        }
        if mask.count_inside() == 0 {
            return Err(Error::DegenerateDomain);
        }
        let s = GoodState { params, r, v, t, mask, patch };
        for node in 0..grid.len() {
            if !s.mask.inside[node] {
                continue;
            }
            let gp = s.point(node);
            if !gp.r.is_finite() || !gp.v[0].is_finite() || !gp.v[1].is_finite() {
                return Err(Error::Domain { what: "non-finite state value", value: gp.r });
            }
            if patch && gp.r < 0.0 {
                return Err(Error::Domain { what: "r", value: gp.r });
            }
            let c = coefficients_unchecked(&gp, &s.params);
            if !(c.a0 >= A0_MIN) {
                return Err(Error::Inadmissible { a0: c.a0, node });
            }
        }
        if !patch {
            match locate_boundary(s.r.comp(0), &grid) {
                Ok(b) => b.check_slopes(&s.params)?,
                Err(Error::DegenerateDomain) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(s)
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        self.r.grid()
    }

    pub fn r(&self) -> &Field {
        &self.r
    }

    pub fn v(&self) -> &Field {
        &self.v
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn is_patch(&self) -> bool {
        self.patch
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn boundary(&self) -> Result<Boundary> {
        locate_boundary(self.r.comp(0), self.grid())
    }

    pub fn point(&self, node: usize) -> GoodPoint {
        GoodPoint { r: self.r.get(node, 0), v: self.v.vec_at(node) }
    }

    /// Coefficients at a node. Off the fluid `r` is clamped so that `⟨r⟩`
    /// stays positive on the signed extension.
    pub fn coeffs(&self, node: usize) -> CoefficientBundle {
        let mut gp = self.point(node);
        let k = self.params.kappa;
        gp.r = gp.r.max(-0.5 * (k + 1.0) / k);
        coefficients_unchecked(&gp, &self.params)
    }

    /// Coefficients and their first derivatives, clamped as in [`Self::coeffs`].
    pub fn coeff_jet(&self, node: usize) -> CoefficientJet {
        let mut gp = self.point(node);
        let k = self.params.kappa;
        gp.r = gp.r.max(-0.5 * (k + 1.0) / k);
        coefficient_jet(&gp, &self.params)
    }

    pub fn differ(&self) -> Differ<'_> {
        Differ::new(self.grid(), &self.mask.support)
    }

    /// Fluid nodes at least `k` grid spacings from the boundary.
    pub fn interior(&self, k: usize) -> Vec<bool> {
        self.mask.interior(self.grid(), k)
    }

    /// Same fluid, new fields; the mask is recomputed from `r` and the
    /// fields are re-extended past the fluid.
    pub fn evolved(&self, mut r: Field, mut v: Field, t: f64) -> Result<Self> {
        if self.patch {
            return Self::patch(self.params, r, v, t);
        }
        let grid = *self.grid();
        let mask = Mask::from_r(r.comp(0), &grid);
        extend(&grid, &mask.inside, r.comp_mut(0));
        for c in 0..v.ncomp() {
            extend(&grid, &mask.inside, v.comp_mut(c));
        }
        Self::new(self.params, r, v, t)
    }

    /// Mirror image `x ↦ −x` on a grid symmetric about the origin (d = 1).
    pub fn reflect(&self) -> Result<Self> {
        let g = self.grid();
        if g.dim() != 1 || abs(g.lo()[0] + g.hi()[0]) > 1e-12 * g.hi()[0].max(1.0) {
            return Err(Error::Unsupported("reflection needs a symmetric one-dimensional grid"));
        }
        let n = g.len();
        let r: Vec<f64> = (0..n).map(|k| self.r.get(n - 1 - k, 0)).collect();
        let v: Vec<f64> = (0..n).map(|k| -self.v.get(n - 1 - k, 0)).collect();
        let build = if self.patch { Self::patch } else { Self::new };
        build(self.params, Field::from_components(*g, vec![r])?, Field::from_components(*g, vec![v])?, self.t)
    }

    /// Largest characteristic speed on the fluid.
    pub fn max_speed(&self, system: System) -> f64 {
        let k = self.params.kappa;
        let mut s: f64 = 0.0;
        for node in 0..self.grid().len() {
            if !self.mask.inside[node] {
                continue;
            }
            let gp = self.point(node);
            let vv = sqrt(gp.v[0] * gp.v[0] + gp.v[1] * gp.v[1]);
            let rp = gp.r.max(0.0);
            let c = match system {
                System::Full => vv / self.coeffs(node).v0 + sqrt(k * rp),
                System::LeadingOrder => vv + sqrt(rp),
            };
            s = s.max(c);
        }
        s
    }

    pub fn cfl_limit(&self, system: System) -> f64 {
        let h = (0..self.grid().dim()).map(|a| self.grid().h(a)).fold(f64::INFINITY, f64::min);
        C_CFL * h / self.max_speed(system).max(1e-300)
    }
}

/// `(∂_t r, ∂_t v)` of the full system on the fluid support.
pub fn rhs(state: &GoodState) -> Result<(Field, Field)> {
    rhs_with(state, System::Full)
}

pub fn rhs_with(state: &GoodState, system: System) -> Result<(Field, Field)> {
    let grid = *state.grid();
    let d = grid.dim();
    let dfn = state.differ();
    let r = state.r().comp(0);
    let dr = dfn.grad(r);
    let dv: Vec<Vec<Vec<f64>>> = (0..d).map(|j| dfn.grad(state.v().comp(j))).collect();
    let mut out_r = Field::zeros(grid, 1);
    let mut out_v = Field::zeros(grid, d);
    let support = &state.mask().support;
    for node in 0..grid.len() {
        if !support[node] {
            continue;
        }
        let gp = state.point(node);
        let (rr, v) = (gp.r, gp.v);
        match system {
            System::Full => {
                let c = state.coeffs(node);
                if state.mask().inside[node] && !(c.a0 >= A0_MIN) {
                    return Err(Error::Inadmissible { a0: c.a0, node });
                }
                let mut transport = 0.0;
                let mut div = 0.0;
                let mut vdr = 0.0;
                for i in 0..d {
                    transport += v[i] / c.v0 * dr[i][node];
                    vdr += v[i] * dr[i][node];
                    for j in 0..d {
                        div += c.g[i][j] * dv[j][i][node];
                    }
                }
                out_r.set(node, 0, -transport - rr * div - rr * c.a1 * vdr);
                for j in 0..d {
                    let adv: f64 = (0..d).map(|i| v[i] / c.v0 * dv[j][i][node]).sum();
                    out_v.set(node, j, -adv - c.a2 * dr[j][node]);
                }
            }
            System::LeadingOrder => {
                let transport: f64 = (0..d).map(|i| v[i] * dr[i][node]).sum();
                let div: f64 = (0..d).map(|i| dv[i][i][node]).sum();
                out_r.set(node, 0, -transport - rr * div);
                for j in 0..d {
                    let adv: f64 = (0..d).map(|i| v[i] * dv[j][i][node]).sum();
                    out_v.set(node, j, -adv - dr[j][node]);
                }
            }
        }
    }
    Ok((out_r, out_v))
}

/// Classical RK4 on `y' = f(y)` for a list of node arrays.
pub fn rk4_advance<F>(y: &[Vec<f64>], dt: f64, mut f: F) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[Vec<f64>]) -> Result<Vec<Vec<f64>>>,
{
    let comb = |base: &[Vec<f64>], k: &[Vec<f64>], a: f64| -> Vec<Vec<f64>> {
        base.iter().zip(k).map(|(b, kk)| b.iter().zip(kk).map(|(x, y)| x + a * y).collect()).collect()
    };
    let k1 = f(y)?;
    let k2 = f(&comb(y, &k1, 0.5 * dt))?;
    let k3 = f(&comb(y, &k2, 0.5 * dt))?;
    let k4 = f(&comb(y, &k3, dt))?;
    Ok(y.iter()
        .enumerate()
        .map(|(c, yc)| {
            (0..yc.len())
                .map(|n| yc[n] + dt / 6.0 * (k1[c][n] + 2.0 * k2[c][n] + 2.0 * k3[c][n] + k4[c][n]))
                .collect()
        })
        .collect())
}

pub(crate) fn stage_state(base: &GoodState, y: &[Vec<f64>]) -> Result<GoodState> {
    let g = *base.grid();
    let r = Field::from_components(g, vec![y[0].clone()])?;
    let v = Field::from_components(g, y[1..].to_vec())?;
    Ok(GoodState { params: base.params, r, v, t: base.t, mask: base.mask.clone(), patch: base.patch })
}

pub(crate) fn state_vec(s: &GoodState) -> Vec<Vec<f64>> {
    let mut y = vec![s.r().comp(0).to_vec()];
    for c in 0..s.v().ncomp() {
        y.push(s.v().comp(c).to_vec());
    }
    y
}

/// One classical RK4 step; the boundary is relocated from the new `r`.
pub fn rk4_step(state: &GoodState, dt: f64) -> Result<GoodState> {
    rk4_step_with(state, dt, System::Full)
}

pub fn rk4_step_with(state: &GoodState, dt: f64, system: System) -> Result<GoodState> {
    if state.grid().dim() != 1 && !state.is_patch() {
        return Err(Error::Unsupported("time stepping a free boundary is one-dimensional"));
    }
    let limit = state.cfl_limit(system);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, limit });
    }
    let y = state_vec(state);
    let y1 = rk4_advance(&y, dt, |yy| {
        let st = stage_state(state, yy)?;
        let (a, b) = rhs_with(&st, system)?;
        let mut out = vec![a.comp(0).to_vec()];
        for c in 0..b.ncomp() {
            out.push(b.comp(c).to_vec());
        }
        Ok(out)
    })?;
    let g = *state.grid();
    let r = Field::from_components(g, vec![y1[0].clone()])?;
    let v = Field::from_components(g, y1[1..].to_vec())?;
    state.evolved(r, v, state.t + dt)
}

/// Integrates to `t_end` with equal steps no larger than `dt_max` (and the
/// CFL limit of the initial state); returns every state including the first.
pub fn rk4_run(state: &GoodState, t_end: f64, dt_max: f64, system: System) -> Result<Vec<GoodState>> {
    let span = t_end - state.t();
    let dt0 = dt_max.min(0.9 * state.cfl_limit(system));
    let steps = libm::ceil(span / dt0).max(1.0) as usize;
    let dt = span / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state.clone());
    for _ in 0..steps {
        let next = rk4_step_with(out.last().unwrap(), dt, system)?;
        out.push(next);
    }
    Ok(out)
}

/// Spatial vorticity `ω₁₂ = ∂₁v₂ − ∂₂v₁`; the only independent component in
/// two dimensions and absent in one.
#[derive(Debug, Clone, PartialEq)]
pub struct Vorticity {
    pub w12: Field,
}

impl Vorticity {
    pub fn get(&self, i: usize, j: usize, node: usize) -> f64 {
        if self.w12.ncomp() == 0 || i == j {
            return 0.0;
        }
        let w = self.w12.get(node, 0);
        if i < j { w } else { -w }
    }
}

pub fn vorticity_of(v: &Field) -> Vorticity {
    let support = vec![true; v.grid().len()];
    vorticity_on(v, &support)
}

pub fn vorticity_on(v: &Field, support: &[bool]) -> Vorticity {
    let g = *v.grid();
    if g.dim() == 1 {
        return Vorticity { w12: Field::zeros(g, 0) };
    }
    let dfn = Differ::new(&g, support);
    let a = dfn.d(v.comp(1), 0);
    let b = dfn.d(v.comp(0), 1);
    let w: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    Vorticity { w12: Field::from_components(g, vec![w]).expect("grid lengths agree") }
}

/// Rate `∂_t ω` from the vorticity transport equation on a given background.
pub fn vorticity_rhs(om: &Vorticity, state: &GoodState) -> Result<Vorticity> {
    let g = *state.grid();
    if g.dim() == 1 || om.w12.ncomp() == 0 {
        return Ok(Vorticity { w12: Field::zeros(g, 0) });
    }
    let dfn = state.differ();
    let dom = dfn.grad(om.w12.comp(0));
    let dr = dfn.grad(state.r().comp(0));
    let dv: Vec<Vec<Vec<f64>>> = (0..2).map(|j| dfn.grad(state.v().comp(j))).collect();
    let mut out = Field::zeros(g, 1);
    for node in 0..g.len() {
        if !state.mask().support[node] {
            continue;
        }
        let c = state.coeffs(node);
        let v = state.v().vec_at(node);
        let w = |i: usize, j: usize| om.get(i, j, node);
        // ∂_i v^k as dvk[i][k]; ∂_i v⁰ by the chain rule.
        let dvk = |i: usize, k: usize| dv[k][i][node];
        let dv0 = |i: usize| c.a2 * dr[i][node] + (v[0] * dvk(i, 0) + v[1] * dvk(i, 1)) / c.v0;
        let (i, j) = (0, 1);
        let mut rate = -(v[0] * dom[0][node] + v[1] * dom[1][node]) / c.v0;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for k in 0..2 {
            s1 += dvk(i, k) * w(k, j) + dvk(j, k) * w(i, k);
            s2 += dv0(i) * v[k] * w(k, j) - dv0(j) * v[k] * w(k, i);
        }
        rate += -s1 / c.v0 + s2 / (c.v0 * c.v0);
        out.set(node, 0, rate);
    }
    Ok(Vorticity { w12: out })
}

/// Max-norm residual of the physical equations `u^μ∂_μϱ + (p+ϱ)∂_μu^μ = 0`
/// and `(p+ϱ)u^μ∂_μu_α + Π^μ_α∂_μp = 0`, reconstructed from uniformly spaced
/// snapshots, over fluid nodes at least five spacings from the boundary.
pub fn physical_residual(traj: &[GoodState]) -> Result<f64> {
    if traj.len() < 3 {
        return Err(Error::InsufficientSnapshots { needed: 3, got: traj.len() });
    }
    check_uniform(traj)?;
    let p = *traj[0].params();
    let k = p.kappa;
    let d = p.dim;
    let grid = *traj[0].grid();
    // Physical fields per snapshot: ϱ, u⁰, u¹, (u²).
    let phys = |s: &GoodState| -> Result<Vec<Vec<f64>>> {
        let mut f = vec![vec![0.0; grid.len()]; 2 + d];
        for node in 0..grid.len() {
            let mut gp = s.point(node);
            gp.r = gp.r.max(0.0);
            let pp = from_good(&gp, &p)?;
            f[0][node] = pp.rho;
            for a in 0..=d {
                f[1 + a][node] = pp.u[a];
            }
        }
        Ok(f)
    };
    let dt = traj[1].t() - traj[0].t();
    let mut worst: f64 = 0.0;
    for m in 1..traj.len() - 1 {
        let (prev, cur, next) = (phys(&traj[m - 1])?, phys(&traj[m])?, phys(&traj[m + 1])?);
        let state = &traj[m];
        let interior = state.interior(5);
        let dfn = state.differ();
        // ∂_μ of each physical field: index 0 is time.
        let mut dfield: Vec<Vec<Vec<f64>>> = Vec::new();
        for q in 0..cur.len() {
            let mut parts = vec![(0..grid.len()).map(|n| (next[q][n] - prev[q][n]) / (2.0 * dt)).collect::<Vec<_>>()];
            parts.extend(dfn.grad(&cur[q]));
            dfield.push(parts);
        }
        for node in 0..grid.len() {
            if !interior[node] {
                continue;
            }
            let rho = cur[0][node];
            let pr = pow(rho, k + 1.0);
            let dp = |mu: usize| (k + 1.0) * pow(rho, k) * dfield[0][mu][node];
            let up: Vec<f64> = (0..=d).map(|a| cur[1 + a][node]).collect();
            let lower = |a: usize| if a == 0 { -up[0] } else { up[a] };
            let du_up = |a: usize, mu: usize| dfield[1 + a][mu][node];
            let du_low = |a: usize, mu: usize| if a == 0 { -du_up(0, mu) } else { du_up(a, mu) };
            let mut e1 = 0.0;
            let mut div = 0.0;
            for mu in 0..=d {
                e1 += up[mu] * dfield[0][mu][node];
                div += du_up(mu, mu);
            }
            e1 += (pr + rho) * div;
            worst = worst.max(abs(e1));
            for alpha in 0..=d {
                let mut e2 = 0.0;
                for mu in 0..=d {
                    let delta = if mu == alpha { 1.0 } else { 0.0 };
                    e2 += (pr + rho) * up[mu] * du_low(alpha, mu) + (delta + up[mu] * lower(alpha)) * dp(mu);
                }
                worst = worst.max(abs(e2));
            }
        }
    }
    Ok(worst)
}

pub(crate) fn check_uniform(traj: &[GoodState]) -> Result<()> {
    let dt = traj[1].t() - traj[0].t();
    if !(dt > 0.0) {
        return Err(Error::NonUniformSnapshots);
    }
    for w in traj.windows(2) {
        if abs(w[1].t() - w[0].t() - dt) > 1e-9 * dt.max(1.0) {
            return Err(Error::NonUniformSnapshots);
        }
        if w[1].grid() != w[0].grid() {
            return Err(Error::Mismatch);
        }
    }
    Ok(())
}

/// `(r, v) ↦ (λ⁻² r(λt, λ²x), λ⁻¹ v(λt, λ²x))`, resampled on the same grid.
pub fn scaling_transform(state: &GoodState, lambda: f64) -> Result<GoodState> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParams("lambda must be positive"));
    }
    let g = *state.grid();
    let d = g.dim();
    let l2 = lambda * lambda;
    let n = g.len();
    let mut r = vec![0.0; n];
    let mut v = vec![vec![0.0; n]; d];
    let mut in_box = vec![false; n];
    for node in 0..n {
        let x = g.x(node);
        let y = [l2 * x[0], l2 * x[1]];
        let yc = [y[0].clamp(g.lo()[0], g.hi()[0]), if d == 2 { y[1].clamp(g.lo()[1], g.hi()[1]) } else { 0.0 }];
        in_box[node] = g.contains(y);
        r[node] = interp_at(&g, state.r().comp(0), yc).unwrap_or(0.0) / l2;
        for (c, vc) in v.iter_mut().enumerate() {
            vc[node] = interp_at(&g, state.v().comp(c), yc).unwrap_or(0.0) / lambda;
        }
    }
    let mask = if state.is_patch() { Mask::full(&g) } else { Mask::from_r(&r, &g) };
    let on_edge = |k: usize| {
        let [i, j] = g.ij(k);
        i == 0 || i + 1 == g.n()[0] || (d == 2 && (j == 0 || j + 1 == g.n()[1]))
    };
    let spills = !state.is_patch() && (0..n).any(|k| mask.inside[k] && on_edge(k) && !state.mask().inside[k]);
    if spills || (0..n).any(|k| mask.support[k] && !in_box[k]) {
        return Err(Error::OutOfBox);
    }
    let rf = Field::from_components(g, vec![r])?;
    let vf = Field::from_components(g, v)?;
    state.evolved(rf, vf, state.t() / lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> Params {
        Params::default()
    }

    fn blob(n: usize, h0: f64, alpha: f64) -> GoodState {
        let g = Grid::new_1d(-1.5, 1.5, n).unwrap();
        GoodState::from_fn(p1(), g, |x| h0 * (1.0 - x[0] * x[0]), |x| [alpha * x[0] * (1.0 - x[0] * x[0]), 0.0], 0.0)
            .unwrap()
    }

    #[test]
    fn patch_at_rest_is_steady() {
        let g = Grid::new_1d(-1.0, 1.0, 64).unwrap();
        let s = GoodState::patch(p1(), Field::scalar_from_fn(g, |_| 0.3), Field::zeros(g, 1), 0.0).unwrap();
        let (a, b) = rhs(&s).unwrap();
        assert!(a.as_slice().iter().chain(b.as_slice()).all(|&x| x.abs() < 1e-14));
        let s1 = rk4_step(&s, 1e-3).unwrap();
        assert!(s1.r().as_slice().iter().all(|&x| (x - 0.3).abs() < 1e-12));
    }

    #[test]
    fn rest_velocity_rhs() {
        let s = blob(201, 0.1, 0.0);
        let (a, b) = rhs(&s).unwrap();
        let int = s.interior(3);
        for node in 0..s.grid().len() {
            if !int[node] {
                continue;
            }
            let x = s.grid().x(node)[0];
            assert!(a.get(node, 0).abs() < 1e-15);
            let c = s.coeffs(node);
            assert!((b.get(node, 0) + c.a2 * (-0.2 * x)).abs() < 1e-10);
        }
    }

    #[test]
    fn manufactured_rhs_convergence() {
        // Closed-form right-hand side from the analytic derivatives.
        let p = p1();
        let rf = |x: f64| 0.1 * (1.0 - x * x) * (1.0 + 0.2 * x);
        let drf = |x: f64| 0.1 * (-2.0 * x * (1.0 + 0.2 * x) + 0.2 * (1.0 - x * x));
        let vf = |x: f64| 0.3 * libm::sin(x) + 0.05;
        let dvf = |x: f64| 0.3 * libm::cos(x);
        let mut errs_int = Vec::new();
        let mut errs_all = Vec::new();
        for n in [101, 201, 401] {
            let g = Grid::new_1d(-1.5, 1.5, n).unwrap();
            let s = GoodState::from_fn(p, g, |x| rf(x[0]), |x| [vf(x[0]), 0.0], 0.0).unwrap();
            let (a, b) = rhs(&s).unwrap();
            let int = s.interior(3);
            let (mut ei, mut ea) = (0.0_f64, 0.0_f64);
            for node in 0..g.len() {
                if !s.mask().inside[node] {
                    continue;
                }
                let x = g.x(node)[0];
                let gp = GoodPoint::new(rf(x), [vf(x), 0.0]);
                let c = coefficients_unchecked(&gp, &p);
                let er = -vf(x) / c.v0 * drf(x) - rf(x) * c.g[0][0] * dvf(x) - rf(x) * c.a1 * vf(x) * drf(x);
                let ev = -vf(x) / c.v0 * dvf(x) - c.a2 * drf(x);
                let e = (a.get(node, 0) - er).abs().max((b.get(node, 0) - ev).abs());
                ea = ea.max(e);
                if int[node] {
                    ei = ei.max(e);
                }
            }
            errs_int.push(ei);
            errs_all.push(ea);
        }
        // Cubic-in-x data: interior stencils are exact up to rounding.
        assert!(errs_int[2] < 1e-10, "{errs_int:?}");
        assert!(errs_all[2] < 1e-8, "{errs_all:?}");
    }

    #[test]
    fn manufactured_rhs_fourth_order_interior() {
        let p = p1();
        let rf = |x: f64| 0.2 + 0.05 * libm::cos(2.0 * x);
        let drf = |x: f64| -0.1 * libm::sin(2.0 * x);
        let vf = |x: f64| 0.3 * libm::sin(x);
        let dvf = |x: f64| 0.3 * libm::cos(x);
        let mut errs = Vec::new();
        for n in [41, 81] {
            let g = Grid::new_1d(-1.0, 1.0, n).unwrap();
            let s = GoodState::patch(p, Field::scalar_from_fn(g, |x| rf(x[0])), Field::scalar_from_fn(g, |x| vf(x[0])), 0.0)
                .unwrap();
            let (a, _) = rhs(&s).unwrap();
            let mut e: f64 = 0.0;
            for node in 0..g.len() {
                let x = g.x(node)[0];
                if x.abs() > 0.8 {
                    continue;
                }
                let c = coefficients_unchecked(&GoodPoint::new(rf(x), [vf(x), 0.0]), &p);
                let er = -vf(x) / c.v0 * drf(x) - rf(x) * c.g[0][0] * dvf(x) - rf(x) * c.a1 * vf(x) * drf(x);
                e = e.max((a.get(node, 0) - er).abs());
            }
            errs.push(e);
        }
        assert!(errs[0] / errs[1] > 12.0, "{errs:?}");
    }

    #[test]
    fn reflection_equivariance() {
        let s = blob(201, 0.1, 0.2);
        let (a, b) = rhs(&s).unwrap();
        let (ar, br) = rhs(&s.reflect().unwrap()).unwrap();
        let n = s.grid().len();
        for k in 0..n {
            assert!((a.get(k, 0) - ar.get(n - 1 - k, 0)).abs() < 1e-13);
            assert!((b.get(k, 0) + br.get(n - 1 - k, 0)).abs() < 1e-13);
        }
        let mut st = s.clone();
        for _ in 0..20 {
            st = rk4_step(&st, 2e-3).unwrap();
        }
        for k in 0..n {
            assert!((st.r().get(k, 0) - st.r().get(n - 1 - k, 0)).abs() < 1e-10);
            assert!((st.v().get(k, 0) + st.v().get(n - 1 - k, 0)).abs() < 1e-10);
        }
    }

    #[test]
    fn cfl_enforced() {
        let s = blob(201, 0.1, 0.2);
        let lim = s.cfl_limit(System::Full);
        assert!(matches!(rk4_step(&s, 2.0 * lim), Err(Error::Cfl { .. })));
    }

    #[test]
    fn leading_order_advection_of_r() {
        // With r ≡ 0 outside a patch the leading-order system at v = c is
        // r_t + c r_x = −r v_x = 0 and v_t = −r_x; take r tiny so v stays constant to O(r).
        let g = Grid::new_1d(-3.0, 3.0, 241).unwrap();
        let c = 0.5;
        let bump = |x: f64| 1e-8 * libm::exp(-4.0 * x * x);
        let s = GoodState::patch(
            p1(),
            Field::scalar_from_fn(g, |x| 1e-6 + bump(x[0])),
            Field::scalar_from_fn(g, |_| c),
            0.0,
        )
        .unwrap();
        let traj = rk4_run(&s, 0.5, 0.01, System::LeadingOrder).unwrap();
        let last = traj.last().unwrap();
        let mut e: f64 = 0.0;
        for node in 0..g.len() {
            let x = g.x(node)[0];
            if x.abs() < 2.0 {
                e = e.max((last.r().get(node, 0) - 1e-6 - bump(x - c * 0.5)).abs());
            }
        }
        assert!(e < 1e-11, "{e}");
    }

    #[test]
    fn vorticity_examples() {
        let g = Grid::new_2d([-1.0, -1.0], [1.0, 1.0], [33, 33]).unwrap();
        let rot = Field::vector_from_fn(g, |x| [-x[1], x[0]]);
        let om = vorticity_of(&rot);
        assert!(om.w12.as_slice().iter().all(|&w| (w - 2.0).abs() < 1e-12));
        assert_eq!(om.get(1, 0, 5), -om.get(0, 1, 5));
        let grad = Field::vector_from_fn(g, |x| [2.0 * x[0] * x[1], x[0] * x[0]]);
        assert!(vorticity_of(&grad).w12.as_slice().iter().all(|&w| w.abs() < 1e-12));
        let g1 = Grid::new_1d(-1.0, 1.0, 33).unwrap();
        assert_eq!(vorticity_of(&Field::zeros(g1, 1)).w12.ncomp(), 0);
    }

    #[test]
    fn vorticity_rate_zero_cases() {
        let g = Grid::new_2d([-1.0, -1.0], [1.0, 1.0], [33, 33]).unwrap();
        let p = Params::new(1.0, 2).unwrap();
        let s = GoodState::patch(p, Field::scalar_from_fn(g, |x| 0.2 + 0.1 * x[0]), Field::zeros(g, 2), 0.0).unwrap();
        let om = Vorticity { w12: Field::scalar_from_fn(g, |_| 1.5) };
        assert!(vorticity_rhs(&om, &s).unwrap().w12.as_slice().iter().all(|&w| w.abs() < 1e-13));
        let zero = Vorticity { w12: Field::zeros(g, 1) };
        assert!(vorticity_rhs(&zero, &s).unwrap().w12.as_slice().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn physical_residual_errors_and_negative_control() {
        let s = blob(101, 0.1, 0.1);
        assert!(matches!(physical_residual(&[s.clone()]), Err(Error::InsufficientSnapshots { .. })));
        let traj = [s.clone(), s.clone().with_time(0.01), s.clone().with_time(0.02)];
        // A frozen non-steady state is not a solution.
        assert!(physical_residual(&traj).unwrap() > 1e-3);
    }

    #[test]
    fn scaling_roots_and_identity() {
        let s = blob(301, 0.1, 0.1);
        let same = scaling_transform(&s, 1.0).unwrap();
        // Fluid values are untouched; only the extension is rebuilt.
        for k in 0..s.grid().len() {
            if s.mask().inside[k] {
                assert!((same.r().get(k, 0) - s.r().get(k, 0)).abs() < 1e-15);
                assert!((same.v().get(k, 0) - s.v().get(k, 0)).abs() < 1e-15);
            }
        }
        let lam = 1.1;
        let sc = scaling_transform(&s, lam).unwrap();
        let roots = sc.boundary().unwrap().roots();
        assert!((roots[1] - 1.0 / (lam * lam)).abs() < 1e-6, "{roots:?}");
        assert!(matches!(scaling_transform(&s, 0.7), Err(Error::OutOfBox)));
        let a = scaling_transform(&scaling_transform(&s, 1.05).unwrap(), 1.1).unwrap();
        let b = scaling_transform(&s, 1.05 * 1.1).unwrap();
        let int = b.interior(2);
        for k in 0..s.grid().len() {
            if int[k] {
                assert!((a.r().get(k, 0) - b.r().get(k, 0)).abs() < 1e-8);
            }
        }
        assert!((a.t() - b.t()).abs() < 1e-15);
    }
}

//! Weighted Sobolev norms `H^{j,σ}`, the pair norms `ℋ` and `ℋ^{2k}`, the
//! control norms `A` and `B`, and a harness for the weighted interpolation
//! inequalities.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use crate::domain::{integrate, Field, Grid, Mask};
use crate::dynamics::GoodState;
use crate::goodvars::Params;
use crate::math::{pow, sqrt};
use crate::stencil::{multi_indices, Differ};
use crate::{Error, Result};

pub const HOLDER_SEED: u64 = 0x5eed_0f_c0ffee;
pub const RANDOM_PAIRS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSpec {
    pub j: usize,
    pub sigma: f64,
}

impl NormSpec {
    pub fn new(j: usize, sigma: f64) -> Result<Self> {
        if !(sigma > -0.5) {
            return Err(Error::DivergentWeight { sigma });
        }
        if j > 4 {
            return Err(Error::Unsupported("derivative order above 4"));
        }
        Ok(NormSpec { j, sigma })
    }
}

/// `∫_{r>0} r^p Σ_c f_c²`.
pub fn weighted_sq(grid: &Grid, r: &[f64], comps: &[&[f64]], p: f64) -> f64 {
    integrate(grid, r, comps, p, |psi, v| {
        if psi <= 0.0 { 0.0 } else { pow(psi, p) * v.iter().map(|x| x * x).sum::<f64>() }
    })
}

/// `∫_{r>0} r^q |f|^p` with `|f|` the Euclidean norm over the components.
pub(crate) fn weighted_lp(grid: &Grid, r: &[f64], comps: &[&[f64]], q: f64, p: f64) -> f64 {
    integrate(grid, r, comps, q, |psi, v| {
        if psi <= 0.0 {
            0.0
        } else {
            pow(psi, q) * pow(v.iter().map(|x| x * x).sum::<f64>(), 0.5 * p)
        }
    })
}

fn support_of(r: &Field) -> Mask {
    Mask::from_r(r.comp(0), r.grid())
}

/// All `∂^α f_c` with `|α| = j`, flattened over components.
fn derivs(dfn: &Differ, f: &Field, j: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for c in 0..f.ncomp() {
        for alpha in multi_indices(f.grid().dim(), j) {
            out.push(dfn.partial(f.comp(c), alpha));
        }
    }
    out
}

fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
    v.iter().map(|x| x.as_slice()).collect()
}

/// `(Σ_{|α|≤j} ‖r^σ ∂^α f‖²_{L²})^{1/2}` over `{r > 0}`.
pub fn norm_hj_sigma(f: &Field, spec: NormSpec, r: &Field) -> Result<f64> {
    let spec = NormSpec::new(spec.j, spec.sigma)?;
    if f.grid() != r.grid() {
        return Err(Error::Mismatch);
    }
    let mask = support_of(r);
    let dfn = Differ::new(r.grid(), &mask.support);
    let mut total = 0.0;
    for jj in 0..=spec.j {
        let d = derivs(&dfn, f, jj);
        total += weighted_sq(r.grid(), r.comp(0), &refs(&d), 2.0 * spec.sigma);
    }
    Ok(sqrt(total))
}

/// The `ℋ^{2k}` pair norm for integer `k ≤ 2`.
pub fn norm_h2k(s: &Field, w: &Field, k: usize, r: &Field, p: &Params) -> Result<f64> {
    if k > 2 {
        return Err(Error::Unsupported("energy levels above 2k = 4"));
    }
    let kap = p.kappa;
    let base = (1.0 - kap) / (2.0 * kap);
    let mask = support_of(r);
    let dfn = Differ::new(r.grid(), &mask.support);
    let mut total = 0.0;
    for order in 0..=2 * k {
        let ds = derivs(&dfn, s, order);
        let dw = derivs(&dfn, w, order);
        for a in order.saturating_sub(k)..=k {
            let a = a as f64;
            total += weighted_sq(r.grid(), r.comp(0), &refs(&ds), 2.0 * (base + a));
            total += weighted_sq(r.grid(), r.comp(0), &refs(&dw), 2.0 * (base + 0.5 + a));
        }
    }
    Ok(sqrt(total))
}

/// `ℋ^j` for any integer `j ≤ 4`: the weight exponents `a` step down from
/// `j/2` by one while `a ≥ max(0, |α| − j/2)`. Even `j` gives [`norm_h2k`].
pub fn norm_h_level(s: &Field, w: &Field, j: usize, r: &Field, p: &Params) -> Result<f64> {
    if j > 4 {
        return Err(Error::Unsupported("levels above 4"));
    }
    let base = (1.0 - p.kappa) / (2.0 * p.kappa);
    let half = j as f64 / 2.0;
    let mask = support_of(r);
    let dfn = Differ::new(r.grid(), &mask.support);
    let mut total = 0.0;
    for order in 0..=j {
        let ds = derivs(&dfn, s, order);
        let dw = derivs(&dfn, w, order);
        let floor = (order as f64 - half).max(0.0);
        let mut a = half;
        while a >= floor - 1e-12 {
            total += weighted_sq(r.grid(), r.comp(0), &refs(&ds), 2.0 * (base + a));
            total += weighted_sq(r.grid(), r.comp(0), &refs(&dw), 2.0 * (base + 0.5 + a));
            a -= 1.0;
        }
    }
    Ok(sqrt(total))
}

/// `ℋ` norm: `(∫ r^{(1−κ)/κ}(s² + a₂⁻¹ r G^{ij} w_i w_j))^{1/2}` on the state's fluid.
pub fn norm_h(s: &Field, w: &Field, state: &GoodState) -> Result<f64> {
    Ok(sqrt(norm_h_sq(s, w, state)?))
}

pub fn norm_h_sq(s: &Field, w: &Field, state: &GoodState) -> Result<f64> {
    let g = *state.grid();
    if s.grid() != &g || w.grid() != &g || w.ncomp() != g.dim() {
        return Err(Error::Mismatch);
    }
    let kap = state.params().kappa;
    let d = g.dim();
    // a₂⁻¹ G^{ij} w_i w_j at nodes; the extra factor r comes from the weight.
    let gw: Vec<f64> = (0..g.len())
        .map(|n| {
            if !state.mask().support[n] {
                return 0.0;
            }
            let c = state.coeffs(n);
            let wv = w.vec_at(n);
            let mut q = 0.0;
            for i in 0..d {
                for j in 0..d {
                    q += c.g[i][j] * wv[i] * wv[j];
                }
            }
            q / c.a2
        })
        .collect();
    let r = state.r().comp(0);
    let e = (1.0 - kap) / kap;
    let s_part = weighted_sq(&g, r, &[s.comp(0)], e);
    let w_part = integrate(&g, r, &[&gw], e + 1.0, |psi, v| if psi <= 0.0 { 0.0 } else { pow(psi, e + 1.0) * v[0] });
    Ok(s_part + w_part)
}

/// Pairs of fluid nodes: every pair at dyadic separation along grid lines,
/// plus a fixed number of seeded random pairs.
pub fn holder_pairs(grid: &Grid, inside: &[bool], seed: u64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    let [n0, n1] = grid.n();
    for node in 0..grid.len() {
        if !inside[node] {
            continue;
        }
        let [i, j] = grid.ij(node);
        for axis in 0..grid.dim() {
            let (pos, n) = if axis == 0 { (i, n0) } else { (j, n1) };
            let mut s = 1;
            while pos + s < n {
                let other = node + s * grid.stride(axis);
                if inside[other] {
                    pairs.push((node, other));
                }
                s *= 2;
            }
        }
    }
    let nodes: Vec<usize> = (0..grid.len()).filter(|&k| inside[k]).collect();
    if nodes.len() >= 2 {
        let mut rng = Pcg64::seed_from_u64(seed);
        for _ in 0..RANDOM_PAIRS {
            let a = nodes[rng.random_range(0..nodes.len())];
            let b = nodes[rng.random_range(0..nodes.len())];
            if a != b {
                pairs.push((a, b));
            }
        }
    }
    pairs
}

fn dist(grid: &Grid, a: usize, b: usize) -> f64 {
    let (x, y) = (grid.x(a), grid.x(b));
    sqrt((x[0] - y[0]) * (x[0] - y[0]) + (x[1] - y[1]) * (x[1] - y[1]))
}

fn diff_norm(comps: &[&[f64]], a: usize, b: usize) -> f64 {
    sqrt(comps.iter().map(|c| (c[a] - c[b]) * (c[a] - c[b])).sum::<f64>())
}

/// `sup |f(x) − f(y)| / |x − y|^{1/2}` over the sampled pairs.
pub fn holder_half(comps: &[&[f64]], grid: &Grid, inside: &[bool]) -> f64 {
    holder_pairs(grid, inside, HOLDER_SEED)
        .into_iter()
        .map(|(a, b)| diff_norm(comps, a, b) / sqrt(dist(grid, a, b)))
        .fold(0.0, f64::max)
}

/// `sup |f(x) − f(y)| / (r(x)^{1/2} + r(y)^{1/2} + |x − y|^{1/2})`.
pub fn tilde_c_half(f: &Field, r: &Field) -> f64 {
    let inside: Vec<bool> = r.comp(0).iter().map(|&x| x > 0.0).collect();
    let comps: Vec<&[f64]> = (0..f.ncomp()).map(|c| f.comp(c)).collect();
    tilde_c_half_comps(&comps, r.comp(0), r.grid(), &inside)
}

fn tilde_c_half_comps(comps: &[&[f64]], r: &[f64], grid: &Grid, inside: &[bool]) -> f64 {
    holder_pairs(grid, inside, HOLDER_SEED)
        .into_iter()
        .map(|(a, b)| {
            diff_norm(comps, a, b) / (sqrt(r[a].max(0.0)) + sqrt(r[b].max(0.0)) + sqrt(dist(grid, a, b)))
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlNorms {
    pub a: f64,
    pub b: f64,
    /// `∇r` at the nearest located boundary point, per node.
    pub n_field: Field,
}

pub fn control_norms(state: &GoodState) -> Result<ControlNorms> {
    let g = *state.grid();
    let d = g.dim();
    let inside = &state.mask().inside;
    let dfn = state.differ();
    let grad_r = dfn.grad(state.r().comp(0));
    let mut n_field = Field::zeros(g, d);
    let bdry = state.boundary().ok();
    let mut sup_dev: f64 = 0.0;
    for node in 0..g.len() {
        if !inside[node] {
            continue;
        }
        let nvec = match &bdry {
            Some(b) => b.nearest(g.x(node)).map(|p| p.grad).unwrap_or([0.0; 2]),
            None => [0.0; 2],
        };
        let mut dev = 0.0;
        for a in 0..d {
            n_field.set(node, a, nvec[a]);
            dev += (grad_r[a][node] - nvec[a]) * (grad_r[a][node] - nvec[a]);
        }
        sup_dev = sup_dev.max(sqrt(dev));
    }
    let vcomps: Vec<&[f64]> = (0..d).map(|c| state.v().comp(c)).collect();
    let a = sup_dev + holder_half(&vcomps, &g, inside);
    let gr: Vec<&[f64]> = grad_r.iter().map(|x| x.as_slice()).collect();
    let tc = tilde_c_half_comps(&gr, state.r().comp(0), &g, inside);
    let dv: Vec<Vec<f64>> = (0..d).flat_map(|c| dfn.grad(state.v().comp(c))).collect();
    let mut sup_dv: f64 = 0.0;
    for node in 0..g.len() {
        if inside[node] {
            sup_dv = sup_dv.max(sqrt(dv.iter().map(|x| x[node] * x[node]).sum::<f64>()));
        }
    }
    Ok(ControlNorms { a, b: a + tc + sup_dv, n_field })
}

pub fn control_a(state: &GoodState) -> Result<f64> {
    Ok(control_norms(state)?.a)
}

pub fn control_b(state: &GoodState) -> Result<f64> {
    Ok(control_norms(state)?.b)
}

/// Which interpolation inequality to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpProp {
    /// Weighted `L^{p₀}`/`L^{p_m}` interpolation.
    Gen,
    /// Interpolation against `L^∞`.
    Linf,
    /// Interpolation against `Ċ^{1/2}`.
    CHalf,
    /// Interpolation against `C̃^{1/2}`.
    CTilde,
}

impl InterpProp {
    pub const ALL: [InterpProp; 4] = [InterpProp::Gen, InterpProp::Linf, InterpProp::CHalf, InterpProp::CTilde];

    pub fn name(self) -> &'static str {
        match self {
            InterpProp::Gen => "gen",
            InterpProp::Linf => "Linf",
            InterpProp::CHalf => "Chalf",
            InterpProp::CTilde => "Ctilde",
        }
    }
}

/// Exponents of one interpolation inequality. `sigma0`, `p0`, `pm` only
/// matter for [`InterpProp::Gen`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub j: usize,
    pub m: usize,
    pub sigma_m: f64,
    pub sigma0: f64,
    pub p0: f64,
    pub pm: f64,
}

/// Derived exponents `(θ, p_j, σ_j)` after checking the hypotheses.
pub fn derived_exponents(prop: InterpProp, e: &Exponents, d: usize) -> Result<(f64, f64, f64)> {
    let (j, m) = (e.j as f64, e.m as f64);
    let d = d as f64;
    let bad = |msg: alloc::string::String| Err(Error::InadmissibleExponents(msg));
    if !(e.j > 0 && e.j < e.m && e.m <= 4) {
        return bad(format!("need 0 < j < m <= 4, got j = {}, m = {}", e.j, e.m));
    }
    let (theta, pj, sj) = match prop {
        InterpProp::Gen => {
            if !(e.p0 >= 1.0 && e.pm >= 1.0) {
                return bad(format!("need p0, pm >= 1, got {} and {}", e.p0, e.pm));
            }
            let theta = j / m;
            let inv = (1.0 - theta) / e.p0 + theta / e.pm;
            let sj = e.sigma0 * (1.0 - theta) + e.sigma_m * theta;
            if !(m - e.sigma_m - d * (1.0 / e.pm - 1.0 / e.p0) > -e.sigma0) {
                return bad(format!("m - sigma_m - d(1/p_m - 1/p_0) > -sigma_0 fails for sigma_m = {}", e.sigma_m));
            }
            if !(sj > -inv) {
                return bad(format!("sigma_j > -1/p_j fails: sigma_j = {sj}"));
            }
            (theta, 1.0 / inv, sj)
        }
        InterpProp::Linf => {
            if !(e.sigma_m > -0.5) {
                return bad(format!("sigma_m > -1/2 fails: {}", e.sigma_m));
            }
            if !(m - e.sigma_m - d / 2.0 > 0.0) {
                return bad(format!("m - sigma_m - d/2 > 0 fails: sigma_m = {}", e.sigma_m));
            }
            let theta = j / m;
            (theta, 2.0 / theta, e.sigma_m * theta)
        }
        InterpProp::CHalf => {
            if !(e.sigma_m > -0.5) {
                return bad(format!("sigma_m > -1/2 fails: {}", e.sigma_m));
            }
            if !(m - 0.5 - e.sigma_m - d / 2.0 > 0.0) {
                return bad(format!("m - 1/2 - sigma_m - d/2 > 0 fails: sigma_m = {}", e.sigma_m));
            }
            let theta = (2.0 * j - 1.0) / (2.0 * m - 1.0);
            (theta, 2.0 / theta, e.sigma_m * theta)
        }
        InterpProp::CTilde => {
            if !(e.sigma_m > (m - 2.0) / 2.0) {
                return bad(format!("sigma_m > (m-2)/2 fails: {}", e.sigma_m));
            }
            if !(m - 0.5 - e.sigma_m - d / 2.0 > 0.0) {
                return bad(format!("m - 1/2 - sigma_m - d/2 > 0 fails: sigma_m = {}", e.sigma_m));
            }
            let theta = j / m;
            (theta, 2.0 / theta, e.sigma_m * theta - 0.5 * (1.0 - theta))
        }
    };
    if !(sj * pj > -1.0) {
        return bad(format!("weight r^(sigma_j p_j) not integrable: sigma_j = {sj}, p_j = {pj}"));
    }
    Ok((theta, pj, sj))
}

/// Left and right sides of one interpolation inequality for one function.
pub fn interp_sides(f: &Field, r: &Field, prop: InterpProp, e: &Exponents) -> Result<(f64, f64)> {
    let g = *r.grid();
    let (theta, pj, sj) = derived_exponents(prop, e, g.dim())?;
    let mask = support_of(r);
    let dfn = Differ::new(&g, &mask.support);
    let rr = r.comp(0);
    let lp = |order: usize, sigma: f64, p: f64| -> f64 {
        let d = derivs(&dfn, f, order);
        pow(weighted_lp(&g, rr, &refs(&d), sigma * p, p), 1.0 / p)
    };
    let lhs = lp(e.j, sj, pj);
    let (pm, sm) = if prop == InterpProp::Gen { (e.pm, e.sigma_m) } else { (2.0, e.sigma_m) };
    let top = lp(e.m, sm, pm);
    let comps: Vec<&[f64]> = (0..f.ncomp()).map(|c| f.comp(c)).collect();
    let low = match prop {
        InterpProp::Gen => lp(0, e.sigma0, e.p0),
        InterpProp::Linf => (0..g.len())
            .filter(|&k| mask.inside[k])
            .map(|k| sqrt(comps.iter().map(|c| c[k] * c[k]).sum::<f64>()))
            .fold(0.0, f64::max),
        InterpProp::CHalf => holder_half(&comps, &g, &mask.inside),
        InterpProp::CTilde => tilde_c_half_comps(&comps, rr, &g, &mask.inside),
    };
    Ok((lhs, pow(low, 1.0 - theta) * pow(top, theta)))
}

/// Max of LHS/RHS over a family for one exponent choice.
pub fn interp_ratio(family: &[Field], r: &Field, prop: InterpProp, e: &Exponents) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut nontrivial = false;
    for f in family {
        let (l, rhs) = interp_sides(f, r, prop, e)?;
        if rhs > 0.0 {
            nontrivial = true;
            worst = worst.max(l / rhs);
        }
    }
    if !nontrivial {
        return Err(Error::TrivialFamily);
    }
    Ok(worst)
}

/// Sweep of admissible exponent choices with `j < m ≤ 4`.
pub fn admissible_exponents(prop: InterpProp, d: usize) -> Vec<Exponents> {
    let mut out = Vec::new();
    for m in 2..=4usize {
        for j in 1..m {
            for k in 0..8 {
                let sigma_m = -0.25 + 0.5 * k as f64;
                let cands: Vec<Exponents> = match prop {
                    InterpProp::Gen => [0.0, 0.5]
                        .iter()
                        .map(|&s0| Exponents { j, m, sigma_m, sigma0: s0, p0: 2.0, pm: 2.0 })
                        .collect(),
                    _ => vec![Exponents { j, m, sigma_m, sigma0: 0.0, p0: 2.0, pm: 2.0 }],
                };
                for e in cands {
                    if derived_exponents(prop, &e, d).is_ok() {
                        out.push(e);
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpReport {
    pub prop: InterpProp,
    pub exponents: Exponents,
    pub ratio: f64,
}

/// Every admissible exponent choice with its worst ratio over the family.
pub fn interp_check(family: &[Field], r: &Field, prop: InterpProp) -> Result<Vec<InterpReport>> {
    admissible_exponents(prop, r.grid().dim())
        .into_iter()
        .map(|e| Ok(InterpReport { prop, exponents: e, ratio: interp_ratio(family, r, prop, &e)? }))
        .collect()
}

/// Worst ratio `‖f‖_{H^{s₂,σ₂}} / ‖f‖_{H^{s₁,σ₁}}` over the family.
pub fn embedding_ratio(family: &[Field], r: &Field, hi: NormSpec, lo: NormSpec) -> Result<f64> {
    if !(hi.j > lo.j && (hi.j - lo.j) as f64 == hi.sigma - lo.sigma) {
        return Err(Error::InadmissibleExponents(format!(
            "need s1 > s2 and s1 - s2 = sigma1 - sigma2, got ({}, {}) and ({}, {})",
            hi.j, hi.sigma, lo.j, lo.sigma
        )));
    }
    let mut worst: f64 = 0.0;
    for f in family {
        let top = norm_hj_sigma(f, hi, r)?;
        if top > 0.0 {
            worst = worst.max(norm_hj_sigma(f, lo, r)? / top);
        }
    }
    Ok(worst)
}

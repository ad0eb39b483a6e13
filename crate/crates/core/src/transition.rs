//! Second-order transition operators `L₁, L̃₁, L₂, L̂₂, L̃₂, L₃, L̃₃`.
//!
//! `L₁, L₂, L₃` are discretized in flux form on cell centers (midpoints in
//! d = 1): the divergence is the exact transpose of the center gradient, so
//! each is self-adjoint in its weight up to round-off. The remaining
//! operators are expanded pointwise and differentiated with [`Differ`].

use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{Field, Grid};
use crate::dynamics::GoodState;
use crate::goodvars::{coefficients_unchecked, GoodPoint};
use crate::math::{pow, sqrt};
use crate::spaces::{control_a, norm_hj_sigma, NormSpec};
use crate::stencil::Differ;
use crate::{Error, Result};

/// Largest `A` at which coercivity ratios are measured.
pub const A_BUDGET: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorId {
    L1,
    TL1,
    L2,
    HatL2,
    TL2,
    L3,
    TL3,
}

impl OperatorId {
    pub fn is_scalar(self) -> bool {
        matches!(self, OperatorId::L1 | OperatorId::TL1)
    }
}

/// Discretization of the self-adjoint operators. `Tampered` shifts the
/// flux divergence by one node and serves as a negative control.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discretization {
    Flux,
    Tampered,
}

// ---------------------------------------------------------------- centers

struct Centers<'a> {
    grid: &'a Grid,
}

impl<'a> Centers<'a> {
    fn len(&self) -> usize {
        let [n0, n1] = self.grid.n();
        if self.grid.dim() == 1 { n0 - 1 } else { (n0 - 1) * (n1 - 1) }
    }

    fn corners(&self, c: usize) -> ([usize; 4], usize) {
        if self.grid.dim() == 1 {
            ([c, c + 1, 0, 0], 2)
        } else {
            let n0 = self.grid.n()[0];
            let (i, j) = (c % (n0 - 1), c / (n0 - 1));
            let b = self.grid.index(i, j);
            ([b, b + 1, b + n0, b + n0 + 1], 4)
        }
    }

    /// Corner weights: average for `None`, difference along `axis` otherwise.
    fn weights(&self, axis: Option<usize>) -> [f64; 4] {
        let g = self.grid;
        match (g.dim(), axis) {
            (1, None) => [0.5, 0.5, 0.0, 0.0],
            (1, Some(_)) => {
                let h = g.h(0);
                [-1.0 / h, 1.0 / h, 0.0, 0.0]
            }
            (_, None) => [0.25; 4],
            (_, Some(0)) => {
                let k = 0.5 / g.h(0);
                [-k, k, -k, k]
            }
            (_, Some(_)) => {
                let k = 0.5 / g.h(1);
                [-k, -k, k, k]
            }
        }
    }

    fn apply(&self, f: &[f64], axis: Option<usize>) -> Vec<f64> {
        let w = self.weights(axis);
        (0..self.len())
            .map(|c| {
                let (idx, m) = self.corners(c);
                (0..m).map(|k| w[k] * f[idx[k]]).sum()
            })
            .collect()
    }

    fn apply_t(&self, y: &[f64], axis: Option<usize>) -> Vec<f64> {
        let w = self.weights(axis);
        let mut out = vec![0.0; self.grid.len()];
        for (c, &yc) in y.iter().enumerate() {
            let (idx, m) = self.corners(c);
            for k in 0..m {
                out[idx[k]] += w[k] * yc;
            }
        }
        out
    }
}

fn shift(mut v: Vec<f64>, disc: Discretization) -> Vec<f64> {
    if disc == Discretization::Tampered {
        v.rotate_left(1);
    }
    v
}

fn center_points(state: &GoodState) -> Vec<GoodPoint> {
    let g = state.grid();
    let cs = Centers { grid: g };
    let r = cs.apply(state.r().comp(0), None);
    let vs: Vec<Vec<f64>> = (0..g.dim()).map(|c| cs.apply(state.v().comp(c), None)).collect();
    (0..cs.len())
        .map(|c| {
            let mut v = [0.0; 2];
            for (a, va) in vs.iter().enumerate() {
                v[a] = va[c];
            }
            GoodPoint::new(r[c], v)
        })
        .collect()
}

fn rpow(r: f64, p: f64) -> f64 {
    if r > 0.0 { pow(r, p) } else { 0.0 }
}

/// `r^{(1−κ)/κ}` on the fluid, zero elsewhere.
pub fn weight_l1(state: &GoodState) -> Vec<f64> {
    let e = (1.0 - state.params().kappa) / state.params().kappa;
    (0..state.grid().len())
        .map(|n| if state.mask().inside[n] { rpow(state.r().get(n, 0), e) } else { 0.0 })
        .collect()
}

/// The matrix weight `r^{1/κ} a₂⁻¹ G` applied to `w` at every fluid node.
pub fn weight_l23(w: &Field, state: &GoodState) -> Field {
    let g = *state.grid();
    let d = g.dim();
    let kap = state.params().kappa;
    let mut out = Field::zeros(g, d);
    for n in 0..g.len() {
        if !state.mask().inside[n] {
            continue;
        }
        let c = state.coeffs(n);
        let s = rpow(state.r().get(n, 0), 1.0 / kap) / c.a2;
        let wv = w.vec_at(n);
        for i in 0..d {
            out.set(n, i, s * (0..d).map(|j| c.g[i][j] * wv[j]).sum::<f64>());
        }
    }
    out
}

/// `r^{-1/κ} a₂ F` with `F = G⁻¹`, zero off the fluid.
fn unweight_l23(y: &[Vec<f64>], state: &GoodState) -> Field {
    let g = *state.grid();
    let d = g.dim();
    let kap = state.params().kappa;
    let mut out = Field::zeros(g, d);
    for n in 0..g.len() {
        let r = state.r().get(n, 0);
        if !state.mask().inside[n] || r <= 0.0 {
            continue;
        }
        let c = state.coeffs(n);
        let f = inverse(c.g, d);
        let s = c.a2 / pow(r, 1.0 / kap);
        for i in 0..d {
            out.set(n, i, s * (0..d).map(|j| f[i][j] * y[j][n]).sum::<f64>());
        }
    }
    out
}

fn inverse(g: [[f64; 2]; 2], d: usize) -> [[f64; 2]; 2] {
    if d == 1 {
        return [[1.0 / g[0][0], 0.0], [0.0, 0.0]];
    }
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]]
}

fn flux_l1(s: &[f64], state: &GoodState, disc: Discretization) -> Vec<f64> {
    let g = state.grid();
    let d = g.dim();
    let kap = state.params().kappa;
    let cs = Centers { grid: g };
    let pts = center_points(state);
    let ds: Vec<Vec<f64>> = (0..d).map(|a| cs.apply(s, Some(a))).collect();
    let mut out = vec![0.0; g.len()];
    for a in 0..d {
        let flux: Vec<f64> = (0..cs.len())
            .map(|c| {
                let p = pts[c];
                if p.r <= 0.0 {
                    return 0.0;
                }
                let cb = coefficients_unchecked(&p, state.params());
                let k = pow(p.r, 1.0 / kap) * cb.a2;
                (0..d).map(|b| k * cb.g[a][b] * ds[b][c]).sum()
            })
            .collect();
        for (o, t) in out.iter_mut().zip(cs.apply_t(&flux, Some(a))) {
            *o -= t;
        }
    }
    let out = shift(out, disc);
    let w = weight_l1(state);
    out.iter().zip(&w).map(|(&x, &wt)| if wt > 0.0 { x / wt } else { 0.0 }).collect()
}

fn flux_l2(w: &Field, state: &GoodState, disc: Discretization) -> Field {
    let g = state.grid();
    let d = g.dim();
    let kap = state.params().kappa;
    let cs = Centers { grid: g };
    let pts = center_points(state);
    let pw = weight_l23(w, state);
    let mut div = vec![0.0; cs.len()];
    for a in 0..d {
        for (dv, x) in div.iter_mut().zip(cs.apply(pw.comp(a), Some(a))) {
            *dv += x;
        }
    }
    for (c, dv) in div.iter_mut().enumerate() {
        let p = pts[c];
        *dv *= if p.r > 0.0 {
            let cb = coefficients_unchecked(&p, state.params());
            cb.a2 * cb.a2 * pow(p.r, 1.0 - 1.0 / kap)
        } else {
            0.0
        };
    }
    let comps = (0..d).map(|a| {
        let t = cs.apply_t(&div, Some(a));
        let t: Vec<f64> = t.into_iter().map(|x| -x).collect();
        let t = shift(t, disc);
        t.into_iter().zip(&state.mask().inside).map(|(x, &ins)| if ins { x } else { 0.0 }).collect()
    });
    Field::from_components(*g, comps.collect()).expect("component length")
}

/// Discrete curl `∂₀w₁ − ∂₁w₀` on cell centers (d = 2).
fn center_curl(w: &Field) -> Vec<f64> {
    let cs = Centers { grid: w.grid() };
    let a = cs.apply(w.comp(1), Some(0));
    let b = cs.apply(w.comp(0), Some(1));
    a.into_iter().zip(b).map(|(x, y)| x - y).collect()
}

fn flux_l3(w: &Field, state: &GoodState, disc: Discretization) -> Field {
    let g = *state.grid();
    if g.dim() == 1 {
        return Field::zeros(g, 1);
    }
    let kap = state.params().kappa;
    let cs = Centers { grid: &g };
    let pts = center_points(state);
    let y: Vec<f64> = center_curl(w)
        .into_iter()
        .zip(&pts)
        .map(|(om, p)| {
            if p.r <= 0.0 {
                return 0.0;
            }
            let cb = coefficients_unchecked(p, state.params());
            pow(p.r, 1.0 + 1.0 / kap) * cb.det_g() * om
        })
        .collect();
    // −Curlᵀ y = (D₁ᵀy, −D₀ᵀy).
    let c0 = shift(cs.apply_t(&y, Some(1)), disc);
    let c1: Vec<f64> = shift(cs.apply_t(&y, Some(0)).into_iter().map(|x| -x).collect(), disc);
    unweight_l23(&[c0, c1], state)
}

// -------------------------------------------------------------- pointwise

struct NodeCoeffs {
    r: Vec<f64>,
    a2: Vec<f64>,
    g: [[Vec<f64>; 2]; 2],
    f: [[Vec<f64>; 2]; 2],
}

fn node_coeffs(state: &GoodState) -> NodeCoeffs {
    let gr = state.grid();
    let d = gr.dim();
    let n = gr.len();
    let z = || [vec![0.0; n], vec![0.0; n]];
    let mut nc = NodeCoeffs { r: state.r().comp(0).to_vec(), a2: vec![0.0; n], g: [z(), z()], f: [z(), z()] };
    for k in 0..n {
        let c = state.coeffs(k);
        nc.a2[k] = c.a2;
        let f = inverse(c.g, d);
        for i in 0..2 {
            for j in 0..2 {
                nc.g[i][j][k] = c.g[i][j];
                nc.f[i][j][k] = f[i][j];
            }
        }
    }
    nc
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn add_to(acc: &mut [f64], x: &[f64], s: f64) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += s * b;
    }
}

fn zero_off(v: Vec<f64>, support: &[bool]) -> Vec<f64> {
    v.into_iter().zip(support).map(|(x, &s)| if s { x } else { 0.0 }).collect()
}

fn hat_l1(s: &[f64], state: &GoodState) -> Vec<f64> {
    let (dfn, nc, kap) = (state.differ(), node_coeffs(state), state.params().kappa);
    let d = state.grid().dim();
    let ds = dfn.grad(s);
    let dr = dfn.grad(&nc.r);
    let mut div = vec![0.0; s.len()];
    let mut low = vec![0.0; s.len()];
    for i in 0..d {
        let mut flux = vec![0.0; s.len()];
        for j in 0..d {
            add_to(&mut flux, &mul(&mul(&nc.a2, &nc.g[i][j]), &ds[j]), 1.0);
            add_to(&mut low, &mul(&mul(&nc.g[i][j], &dr[i]), &ds[j]), 1.0);
        }
        add_to(&mut div, &dfn.d(&flux, i), 1.0);
    }
    let out = (0..s.len()).map(|k| nc.r[k] * div[k] + nc.a2[k] / kap * low[k]).collect();
    zero_off(out, state.mask().support.as_slice())
}

fn tilde_l1(s: &[f64], state: &GoodState) -> Vec<f64> {
    let (dfn, nc, kap) = (state.differ(), node_coeffs(state), state.params().kappa);
    let d = state.grid().dim();
    let ds = dfn.grad(s);
    let dr = dfn.grad(&nc.r);
    let mut out = vec![0.0; s.len()];
    for i in 0..d {
        for j in 0..d {
            let mut alpha = [0, 0];
            alpha[i] += 1;
            alpha[j] += 1;
            let dij = dfn.partial(s, alpha);
            for k in 0..s.len() {
                out[k] += nc.a2[k] * nc.g[i][j][k] * (nc.r[k] * dij[k] + dr[i][k] * ds[j][k] / kap);
            }
        }
    }
    zero_off(out, &state.mask().support)
}

fn grads(dfn: &Differ, w: &Field) -> Vec<Vec<Vec<f64>>> {
    (0..w.ncomp()).map(|l| dfn.grad(w.comp(l))).collect()
}

fn hat_l2(w: &Field, state: &GoodState, tilde: bool) -> Field {
    let (dfn, nc, kap) = (state.differ(), node_coeffs(state), state.params().kappa);
    let g = *state.grid();
    let (d, n) = (g.dim(), g.len());
    let dw = grads(&dfn, w);
    let dr = dfn.grad(&nc.r);
    let mut comps = Vec::new();
    for i in 0..d {
        let mut out = vec![0.0; n];
        for m in 0..d {
            for l in 0..d {
                let rdw = mul(&nc.r, &dw[l][m]);
                if tilde {
                    // a₂G^{ml}(∂_i(r∂_m w_l) + κ⁻¹∂_m r ∂_i w_l)
                    let di = dfn.d(&rdw, i);
                    for k in 0..n {
                        out[k] += nc.a2[k] * nc.g[m][l][k] * (di[k] + dr[m][k] * dw[l][i][k] / kap);
                    }
                } else {
                    // a₂(∂_i(rG^{ml}∂_m w_l) + κ⁻¹G^{ml}∂_m r ∂_i w_l)
                    let di = dfn.d(&mul(&rdw, &nc.g[m][l]), i);
                    for k in 0..n {
                        out[k] += nc.a2[k] * (di[k] + nc.g[m][l][k] * dr[m][k] * dw[l][i][k] / kap);
                    }
                }
            }
        }
        comps.push(zero_off(out, &state.mask().support));
    }
    Field::from_components(g, comps).expect("component length")
}

/// `L₂` expanded pointwise: `∂_i(a₂²(r∂_m + κ⁻¹∂_m r)(a₂⁻¹G^{ml}w_l))`.
fn point_l2(w: &Field, state: &GoodState) -> Field {
    let (dfn, nc, kap) = (state.differ(), node_coeffs(state), state.params().kappa);
    let g = *state.grid();
    let (d, n) = (g.dim(), g.len());
    let dr = dfn.grad(&nc.r);
    let mut q = vec![0.0; n];
    for m in 0..d {
        let mut p = vec![0.0; n];
        for l in 0..d {
            for k in 0..n {
                p[k] += nc.g[m][l][k] * w.get(k, l) / nc.a2[k];
            }
        }
        let dp = dfn.d(&p, m);
        for k in 0..n {
            q[k] += nc.a2[k] * nc.a2[k] * (nc.r[k] * dp[k] + dr[m][k] * p[k] / kap);
        }
    }
    let comps = (0..d).map(|i| zero_off(dfn.d(&q, i), &state.mask().support)).collect();
    Field::from_components(g, comps).expect("component length")
}

fn omega_tensor(dfn: &Differ, w: &Field) -> [[Vec<f64>; 2]; 2] {
    let dw = grads(dfn, w);
    let n = w.grid().len();
    let z = vec![0.0; n];
    let om: Vec<f64> = (0..n).map(|k| dw[1][0][k] - dw[0][1][k]).collect();
    let neg: Vec<f64> = om.iter().map(|x| -x).collect();
    [[z.clone(), om], [neg, z]]
}

/// `T_j = r ∂_l S^{lj} + (1+κ⁻¹) ∂_l r S^{lj}` then `out_i = a₂ M_{ij} T_j`.
fn curl_like(state: &GoodState, s: &[[Vec<f64>; 2]; 2], m: &[[Vec<f64>; 2]; 2]) -> Field {
    let (dfn, nc, kap) = (state.differ(), node_coeffs(state), state.params().kappa);
    let g = *state.grid();
    let n = g.len();
    let dr = dfn.grad(&nc.r);
    let mut t = [vec![0.0; n], vec![0.0; n]];
    for j in 0..2 {
        for l in 0..2 {
            let dl = dfn.d(&s[l][j], l);
            for k in 0..n {
                t[j][k] += nc.r[k] * dl[k] + (1.0 + 1.0 / kap) * dr[l][k] * s[l][j][k];
            }
        }
    }
    let comps = (0..2)
        .map(|i| {
            let out = (0..n).map(|k| nc.a2[k] * (m[i][0][k] * t[0][k] + m[i][1][k] * t[1][k])).collect();
            zero_off(out, &state.mask().support)
        })
        .collect();
    Field::from_components(g, comps).expect("component length")
}

fn tilde_l3(w: &Field, state: &GoodState) -> Field {
    let g = *state.grid();
    if g.dim() == 1 {
        return Field::zeros(g, 1);
    }
    let om = omega_tensor(&state.differ(), w);
    curl_like(state, &om, &node_coeffs(state).g)
}

fn point_l3(w: &Field, state: &GoodState) -> Field {
    let g = *state.grid();
    if g.dim() == 1 {
        return Field::zeros(g, 1);
    }
    let nc = node_coeffs(state);
    let om = omega_tensor(&state.differ(), w);
    let n = g.len();
    // S^{lj} = G^{lm} G^{jp} Ω_{mp}
    let mut s = [[vec![0.0; n], vec![0.0; n]], [vec![0.0; n], vec![0.0; n]]];
    for l in 0..2 {
        for j in 0..2 {
            for m in 0..2 {
                for p in 0..2 {
                    for k in 0..n {
                        s[l][j][k] += nc.g[l][m][k] * nc.g[j][p][k] * om[m][p][k];
                    }
                }
            }
        }
    }
    curl_like(state, &s, &nc.f)
}

fn check_field(op: OperatorId, f: &Field, state: &GoodState) -> Result<()> {
    let want = if op.is_scalar() { 1 } else { state.grid().dim() };
    if f.grid() != state.grid() || f.ncomp() != want {
        return Err(Error::Mismatch);
    }
    Ok(())
}

/// Apply an operator. `L1, L2, L3` use the flux form.
pub fn apply(op: OperatorId, f: &Field, state: &GoodState) -> Result<Field> {
    apply_with(op, f, state, Discretization::Flux)
}

pub fn apply_with(op: OperatorId, f: &Field, state: &GoodState, disc: Discretization) -> Result<Field> {
    check_field(op, f, state)?;
    let g = *state.grid();
    Ok(match op {
        OperatorId::L1 => Field::from_components(g, vec![flux_l1(f.comp(0), state, disc)])?,
        OperatorId::TL1 => Field::from_components(g, vec![tilde_l1(f.comp(0), state)])?,
        OperatorId::L2 => flux_l2(f, state, disc),
        OperatorId::HatL2 => hat_l2(f, state, false),
        OperatorId::TL2 => hat_l2(f, state, true),
        OperatorId::L3 => flux_l3(f, state, disc),
        OperatorId::TL3 => tilde_l3(f, state),
    })
}

/// Pointwise expansion of `L1, L2, L3`; other operators are already pointwise.
pub fn apply_pointwise(op: OperatorId, f: &Field, state: &GoodState) -> Result<Field> {
    check_field(op, f, state)?;
    let g = *state.grid();
    Ok(match op {
        OperatorId::L1 => Field::from_components(g, vec![hat_l1(f.comp(0), state)])?,
        OperatorId::L2 => point_l2(f, state),
        OperatorId::L3 => point_l3(f, state),
        other => apply(other, f, state)?,
    })
}

/// Discrete curl on cell centers; empty in d = 1.
pub fn curl(w: &Field) -> Vec<f64> {
    if w.grid().dim() == 1 { Vec::new() } else { center_curl(w) }
}

// -------------------------------------------------------------- relations

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `L₁s − L̃₁s = r ∂_i(a₂G^{ij}) ∂_j s`.
    L1,
    /// `L₂w − L̂₂w` against its lower-order expansion.
    L2,
}

/// Right-hand side of the `L₂ − L̂₂` identity:
/// `∂_i a₂ r∂_m(G^{ml}w_l) + a₂∂_i(r ∂_mG^{ml} w_l) + ∂_i(r a₂² ∂_m a₂⁻¹ G^{ml}w_l)
///  + κ⁻¹∂_i a₂ G^{ml}∂_m r w_l + κ⁻¹a₂ ∂_i(G^{ml}∂_m r) w_l`.
fn l2_lower(w: &Field, state: &GoodState) -> Vec<Vec<f64>> {
    let (dfn, nc, kap) = (state.differ(), node_coeffs(state), state.params().kappa);
    let d = state.grid().dim();
    let n = state.grid().len();
    let dr = dfn.grad(&nc.r);
    let da2 = dfn.grad(&nc.a2);
    let inv_a2: Vec<f64> = nc.a2.iter().map(|x| 1.0 / x).collect();
    let dinv = dfn.grad(&inv_a2);
    let mut div_gw = vec![0.0; n];
    let mut t2 = vec![0.0; n];
    let mut t3 = vec![0.0; n];
    let mut gdrw = vec![0.0; n];
    let mut gdr = [vec![0.0; n], vec![0.0; n]];
    for m in 0..d {
        for l in 0..d {
            let gw: Vec<f64> = (0..n).map(|k| nc.g[m][l][k] * w.get(k, l)).collect();
            add_to(&mut div_gw, &dfn.d(&gw, m), 1.0);
            let dg = dfn.d(&nc.g[m][l], m);
            for k in 0..n {
                t2[k] += nc.r[k] * dg[k] * w.get(k, l);
                t3[k] += nc.r[k] * nc.a2[k] * nc.a2[k] * dinv[m][k] * gw[k];
                gdrw[k] += gw[k] * dr[m][k];
                gdr[l][k] += nc.g[m][l][k] * dr[m][k];
            }
        }
    }
    (0..d)
        .map(|i| {
            let d2 = dfn.d(&t2, i);
            let d3 = dfn.d(&t3, i);
            let mut out: Vec<f64> = (0..n)
                .map(|k| da2[i][k] * (nc.r[k] * div_gw[k] + gdrw[k] / kap) + nc.a2[k] * d2[k] + d3[k])
                .collect();
            for l in 0..d {
                let dg = dfn.d(&gdr[l], i);
                for k in 0..n {
                    out[k] += nc.a2[k] / kap * dg[k] * w.get(k, l);
                }
            }
            out
        })
        .collect()
}

/// Max-norm mismatch of a relation over fluid nodes at least 5 nodes from
/// the exterior.
pub fn relation_defect(rel: Relation, f: &Field, state: &GoodState) -> Result<f64> {
    let inner = state.interior(5);
    let mut worst: f64 = 0.0;
    match rel {
        Relation::L1 => {
            check_field(OperatorId::L1, f, state)?;
            let lhs = apply(OperatorId::L1, f, state)?;
            let t = apply(OperatorId::TL1, f, state)?;
            let (dfn, nc) = (state.differ(), node_coeffs(state));
            let d = state.grid().dim();
            let ds = dfn.grad(f.comp(0));
            let mut rhs = vec![0.0; f.grid().len()];
            for i in 0..d {
                for j in 0..d {
                    let dk = dfn.d(&mul(&nc.a2, &nc.g[i][j]), i);
                    for k in 0..rhs.len() {
                        rhs[k] += nc.r[k] * dk[k] * ds[j][k];
                    }
                }
            }
            for k in 0..rhs.len() {
                if inner[k] {
                    worst = worst.max((lhs.get(k, 0) - t.get(k, 0) - rhs[k]).abs());
                }
            }
        }
        Relation::L2 => {
            check_field(OperatorId::L2, f, state)?;
            let lhs = apply(OperatorId::L2, f, state)?;
            let hat = apply(OperatorId::HatL2, f, state)?;
            let rhs = l2_lower(f, state);
            for (i, ri) in rhs.iter().enumerate() {
                for k in 0..ri.len() {
                    if inner[k] {
                        worst = worst.max((lhs.get(k, i) - hat.get(k, i) - ri[k]).abs());
                    }
                }
            }
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------- adjoints

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjointDefect {
    /// `⟨op u, w⟩ − ⟨u, op w⟩` in the operator's weight.
    pub signed: f64,
    /// `|signed|` over `‖op u‖‖w‖ + ‖u‖‖op w‖`.
    pub relative: f64,
    /// The supports reach within the collar of the boundary.
    pub touches_collar: bool,
}

fn inner(op: OperatorId, a: &Field, b: &Field, state: &GoodState) -> f64 {
    let vol = state.grid().cell_volume();
    if op.is_scalar() {
        let w = weight_l1(state);
        vol * (0..w.len()).map(|k| w[k] * a.get(k, 0) * b.get(k, 0)).sum::<f64>()
    } else {
        let mb = weight_l23(b, state);
        vol * a.as_slice().iter().zip(mb.as_slice()).map(|(x, y)| x * y).sum::<f64>()
    }
}

pub fn adjoint_defect(op: OperatorId, u: &Field, w: &Field, state: &GoodState) -> Result<AdjointDefect> {
    adjoint_defect_with(op, u, w, state, Discretization::Flux)
}

pub fn adjoint_defect_with(
    op: OperatorId,
    u: &Field,
    w: &Field,
    state: &GoodState,
    disc: Discretization,
) -> Result<AdjointDefect> {
    if !matches!(op, OperatorId::L1 | OperatorId::L2 | OperatorId::L3) {
        return Err(Error::Unsupported("adjoint defect is defined for L1, L2, L3"));
    }
    let lu = apply_with(op, u, state, disc)?;
    let lw = apply_with(op, w, state, disc)?;
    let a = inner(op, &lu, w, state);
    let b = inner(op, u, &lw, state);
    let nrm = |f: &Field| sqrt(inner(op, f, f, state).abs());
    let scale = nrm(&lu) * nrm(w) + nrm(u) * nrm(&lw);
    let safe = state.interior(crate::domain::COLLAR + 1);
    let touches = (0..state.grid().len()).any(|k| {
        !safe[k] && (0..u.ncomp()).any(|c| u.get(k, c) != 0.0 || w.get(k, c) != 0.0)
    });
    Ok(AdjointDefect {
        signed: a - b,
        relative: if scale > 0.0 { (a - b).abs() / scale } else { 0.0 },
        touches_collar: touches,
    })
}

// -------------------------------------------------------------- coercivity

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoercivityFamily {
    /// `‖s‖_{H^{2,1/(2κ)+1/2}} / (‖L̃₁s‖_{H^{0,1/(2κ)−1/2}} + ‖s‖_{L²(r^{(1−κ)/κ})})`.
    TL1,
    /// `‖w‖_{H^{2,1/(2κ)+1}} / (‖(L̃₂+L̃₃)w‖_{H^{0,1/(2κ)}} + ‖w‖_{L²(r^{1/κ})})`.
    TL23,
}

/// Max ratio over nonzero samples. Refuses if `A` exceeds [`A_BUDGET`].
pub fn coercivity_ratio(fam: CoercivityFamily, samples: &[Field], state: &GoodState) -> Result<f64> {
    let a = control_a(state)?;
    if a > A_BUDGET {
        return Err(Error::ControlTooLarge { a, limit: A_BUDGET });
    }
    let kap = state.params().kappa;
    let e = 1.0 / (2.0 * kap);
    let r = state.r();
    let mut worst: f64 = 0.0;
    let mut seen = false;
    for f in samples {
        let (lhs, rhs) = match fam {
            CoercivityFamily::TL1 => {
                let l = apply(OperatorId::TL1, f, state)?;
                let lhs = norm_hj_sigma(f, NormSpec::new(2, e + 0.5)?, r)?;
                let rhs = norm_hj_sigma(&l, NormSpec::new(0, e - 0.5)?, r)? + norm_hj_sigma(f, NormSpec::new(0, e - 0.5)?, r)?;
                (lhs, rhs)
            }
            CoercivityFamily::TL23 => {
                let l = apply(OperatorId::TL2, f, state)?.axpy(1.0, &apply(OperatorId::TL3, f, state)?)?;
                let lhs = norm_hj_sigma(f, NormSpec::new(2, e + 1.0)?, r)?;
                let rhs = norm_hj_sigma(&l, NormSpec::new(0, e)?, r)? + norm_hj_sigma(f, NormSpec::new(0, e)?, r)?;
                (lhs, rhs)
            }
        };
        if lhs > 0.0 {
            seen = true;
            worst = worst.max(lhs / rhs);
        }
    }
    if !seen {
        return Err(Error::TrivialFamily);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{smooth_family, Family};
    use crate::goodvars::Params;

    fn blob(n: usize, alpha: f64) -> GoodState {
        let g = Grid::new_1d(-1.5, 1.5, n).unwrap();
        let f = Family::Blob1d { h0: 0.06, alpha, beta: 0.0 };
        f.state(Params::default(), g).unwrap()
    }

    fn rest(n: usize, kappa: f64) -> GoodState {
        let g = Grid::new_1d(-1.5, 1.5, n).unwrap();
        GoodState::from_fn(Params::new(kappa, 1).unwrap(), g, |x| 1.0 - x[0] * x[0], |_| [0.0, 0.0], 0.0).unwrap()
    }

    fn bump(g: Grid, c: f64, w: f64, p: i32) -> Field {
        Field::scalar_from_fn(g, |x| {
            let t = (x[0] - c) / w;
            if t.abs() < 1.0 { (1.0 - t * t).powi(p) } else { 0.0 }
        })
    }

    /// Max error on `|x| ≤ 0.8`; near the boundary the `r^{1/κ}` weights
    /// keep the flux form from converging at a fixed node distance.
    fn max_inner(a: &Field, b: &dyn Fn([f64; 2]) -> f64, st: &GoodState) -> f64 {
        let inner = st.interior(5);
        let g = a.grid();
        (0..g.len()).filter(|&k| inner[k] && g.x(k)[0].abs() <= 0.8).map(|k| (a.get(k, 0) - b(a.grid().x(k))).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn constants_annihilated() {
        let st = blob(201, 0.08);
        let one = Field::scalar_from_fn(*st.grid(), |_| 2.5);
        for op in [OperatorId::L1, OperatorId::TL1] {
            let out = apply(op, &one, &st).unwrap();
            assert!(out.as_slice().iter().all(|x| x.abs() < 1e-12), "{op:?}");
        }
        assert!(apply_pointwise(OperatorId::L1, &one, &st).unwrap().as_slice().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn l1_symbolic_oracle_second_order() {
        // v = 0: a₂G = κ and L₁s = κ r s'' + r' s'.
        let kap = 2.0;
        let exact = |x: [f64; 2]| {
            let (r, dr) = (1.0 - x[0] * x[0], -2.0 * x[0]);
            -4.0 * kap * r * (2.0 * x[0]).sin() + 2.0 * dr * (2.0 * x[0]).cos()
        };
        let mut errs = Vec::new();
        for n in [201, 401] {
            let st = rest(n, kap);
            let s = Field::scalar_from_fn(*st.grid(), |x| (2.0 * x[0]).sin());
            let flux = apply(OperatorId::L1, &s, &st).unwrap();
            errs.push(max_inner(&flux, &exact, &st));
            let tl = apply(OperatorId::TL1, &s, &st).unwrap();
            assert!(max_inner(&tl, &exact, &st) < 1e-5);
        }
        let ratio = errs[0] / errs[1];
        assert!(errs[1] < 1e-3 && ratio > 3.0, "{errs:?}");
    }

    #[test]
    fn hat_l2_symbolic_oracle() {
        let kap = 1.0;
        let st = rest(401, kap);
        let w = Field::scalar_from_fn(*st.grid(), |x| (1.3 * x[0]).cos());
        let exact = |x: [f64; 2]| {
            let x = x[0];
            let (r, dr) = (1.0 - x * x, -2.0 * x);
            let rb = 1.0 + kap * r / (kap + 1.0);
            let a2 = rb.powf(1.0 / kap);
            let g = kap * rb.powf(-1.0 / kap);
            let dg = -kap / (kap + 1.0) * rb.powf(-1.0 / kap - 1.0) * dr;
            let (w1, w2) = (-1.3 * (1.3 * x).sin(), -1.69 * (1.3 * x).cos());
            a2 * ((dr * g + r * dg) * w1 + r * g * w2) + a2 / kap * g * dr * w1
        };
        let out = apply(OperatorId::HatL2, &w, &st).unwrap();
        assert!(max_inner(&out, &exact, &st) < 1e-6);
    }

    #[test]
    fn relation_defects_converge() {
        let mut d1 = Vec::new();
        let mut d2 = Vec::new();
        for n in [401, 801] {
            let st = blob(n, 0.3);
            let s = Field::scalar_from_fn(*st.grid(), |x| (1.7 * x[0]).sin() + x[0] * x[0]);
            d1.push(relation_defect(Relation::L1, &s, &st).unwrap());
            d2.push(relation_defect(Relation::L2, &s, &st).unwrap());
        }
        assert!(d1[0] / d1[1] > 3.0, "{d1:?}");
        assert!(d2[0] / d2[1] > 3.0, "{d2:?}");
        let zero = Field::zeros(*blob(101, 0.3).grid(), 1);
        assert_eq!(relation_defect(Relation::L2, &zero, &blob(101, 0.3)).unwrap(), 0.0);
    }

    #[test]
    fn constant_background_relations_collapse() {
        let g = Grid::new_1d(-1.0, 1.0, 101).unwrap();
        let st = GoodState::patch(Params::default(), Field::scalar_from_fn(g, |_| 0.3), Field::scalar_from_fn(g, |_| 0.1), 0.0).unwrap();
        let s = Field::scalar_from_fn(g, |x| (3.0 * x[0]).sin());
        assert!(relation_defect(Relation::L1, &s, &st).unwrap() < 5e-3);
        let l = apply(OperatorId::L1, &s, &st).unwrap();
        let t = apply(OperatorId::TL1, &s, &st).unwrap();
        let inner = st.interior(5);
        for k in 0..g.len() {
            if inner[k] {
                assert!((l.get(k, 0) - t.get(k, 0)).abs() < 5e-3);
            }
        }
    }

    #[test]
    fn adjoint_exact_in_flux_form() {
        let st = blob(512, 0.08);
        let g = *st.grid();
        let u = bump(g, -0.2, 0.5, 4);
        let w = bump(g, 0.15, 0.4, 5);
        for op in [OperatorId::L1, OperatorId::L2] {
            let a = adjoint_defect(op, &u, &w, &st).unwrap();
            assert!(a.relative < 1e-12, "{op:?} {a:?}");
            assert!(!a.touches_collar);
            let same = adjoint_defect(op, &u, &u, &st).unwrap();
            assert_eq!(same.signed, 0.0);
            let swapped = adjoint_defect(op, &w, &u, &st).unwrap();
            assert!((swapped.signed + a.signed).abs() <= 1e-15 * (1.0 + a.signed.abs()));
            let bad = adjoint_defect_with(op, &u, &w, &st, Discretization::Tampered).unwrap();
            assert!(bad.relative > 1e-4, "{op:?} {bad:?}");
        }
        assert!(adjoint_defect(OperatorId::TL1, &u, &w, &st).is_err());
    }

    fn disk(n: usize) -> GoodState {
        let g = Grid::new_2d([-1.4, -1.4], [1.4, 1.4], [n, n]).unwrap();
        let f = Family::Disk2d { h0: 0.06, alpha: 0.1, omega: 0.05 };
        f.state(Params::new(1.0, 2).unwrap(), g).unwrap()
    }

    fn bump2(g: Grid, c: [f64; 2], k: [f64; 2]) -> Field {
        Field::vector_from_fn(g, |x| {
            let q = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / 0.25;
            let b = if q < 1.0 { (1.0 - q).powi(4) } else { 0.0 };
            [b * (k[0] + x[1]), b * (k[1] - x[0] * x[0])]
        })
    }

    #[test]
    fn two_d_structure() {
        let st = disk(64);
        let g = *st.grid();
        let u = bump2(g, [0.1, -0.1], [1.0, 0.3]);
        let w = bump2(g, [-0.15, 0.2], [-0.4, 0.8]);
        for op in [OperatorId::L2, OperatorId::L3] {
            let a = adjoint_defect(op, &u, &w, &st).unwrap();
            assert!(a.relative < 1e-12, "{op:?} {a:?}");
            assert!(adjoint_defect_with(op, &u, &w, &st, Discretization::Tampered).unwrap().relative > 1e-4);
        }
        let l2u = apply(OperatorId::L2, &u, &st).unwrap();
        let scale = l2u.as_slice().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let c = curl(&l2u);
        assert!(c.iter().all(|x| x.abs() < 1e-10 * scale.max(1.0)));
        let l3u = apply(OperatorId::L3, &u, &st).unwrap();
        let l2l3 = apply(OperatorId::L2, &l3u, &st).unwrap();
        let s3 = l3u.as_slice().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(s3 > 0.0);
        assert!(l2l3.as_slice().iter().all(|x| x.abs() < 1e-10 * s3));
        let l3l2 = apply(OperatorId::L3, &l2u, &st).unwrap();
        assert!(l3l2.as_slice().iter().all(|x| x.abs() < 1e-10 * scale));
    }

    #[test]
    fn gradients_killed_by_curl_operators() {
        let st = disk(64);
        let g = *st.grid();
        let grad = Field::vector_from_fn(g, |x| [2.0 * x[0] * x[1], x[0] * x[0] + 3.0 * x[1] * x[1]]);
        let l3 = apply(OperatorId::L3, &grad, &st).unwrap();
        let p3 = apply_pointwise(OperatorId::L3, &grad, &st).unwrap();
        let t3 = apply(OperatorId::TL3, &grad, &st).unwrap();
        for f in [&l3, &p3, &t3] {
            assert!(f.as_slice().iter().all(|x| x.abs() < 1e-10));
        }
        let g1 = Grid::new_1d(-1.5, 1.5, 64).unwrap();
        let st1 = Family::blob1d().state(Params::default(), g1).unwrap();
        let any = Field::scalar_from_fn(g1, |x| x[0]);
        assert!(apply(OperatorId::L3, &any, &st1).unwrap().as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pointwise_l3_matches_flux_in_interior() {
        let mut errs = Vec::new();
        for n in [48, 96] {
            let st = disk(n);
            let g = *st.grid();
            let u = Field::vector_from_fn(g, |x| [(x[1]).sin(), (0.7 * x[0]).cos() * x[1]]);
            let a = apply(OperatorId::L3, &u, &st).unwrap();
            let b = apply_pointwise(OperatorId::L3, &u, &st).unwrap();
            let inner = st.interior(5);
            let deep = |k: usize| {
                let x = g.x(k);
                x[0] * x[0] + x[1] * x[1] <= 0.49
            };
            let e = (0..g.len()).filter(|&k| inner[k] && deep(k)).flat_map(|k| (0..2).map(move |c| (k, c)))
                .map(|(k, c)| (a.get(k, c) - b.get(k, c)).abs()).fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
    }

    #[test]
    fn coercivity_finite_and_stable() {
        let mut out = Vec::new();
        for n in [257, 513] {
            let st = blob(n, 0.08);
            let fam = smooth_family(st.grid(), 20);
            let a = coercivity_ratio(CoercivityFamily::TL1, &fam, &st).unwrap();
            let b = coercivity_ratio(CoercivityFamily::TL23, &fam, &st).unwrap();
            assert!(a.is_finite() && b.is_finite());
            out.push((a, b));
        }
        assert!((out[0].0 / out[1].0 - 1.0).abs() < 0.15, "{out:?}");
        assert!((out[0].1 / out[1].1 - 1.0).abs() < 0.15, "{out:?}");
        let st = blob(257, 0.08);
        assert_eq!(coercivity_ratio(CoercivityFamily::TL1, &[Field::zeros(*st.grid(), 1)], &st), Err(Error::TrivialFamily));
        let rough = GoodState::from_fn(Params::default(), *st.grid(), |x| 0.06 * (1.0 - x[0] * x[0]), |x| [3.0 * (x[0] * 40.0).sin(), 0.0], 0.0).unwrap();
        assert!(matches!(coercivity_ratio(CoercivityFamily::TL1, &fam_of(&rough), &rough), Err(Error::ControlTooLarge { .. })));
    }

    fn fam_of(st: &GoodState) -> Vec<Field> {
        smooth_family(st.grid(), 3)
    }
}

//! The subcommands behind the `relvac` binary.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use relvac_core::distance::{pair_row, summarize, PairConfig, PairRow};
use relvac_core::dynamics::{rk4_run, System};
use relvac_core::energy::{coercivity_ratio, snapshot_window, EnergyReport};
use relvac_core::families::smooth_family;
use relvac_core::spaces::{interp_check, InterpProp};
use relvac_core::stepper::{self, level_energy, StepReport};
use relvac_core::transition::{self, CoercivityFamily};
use relvac_core::{Error as CoreError, GoodState};
use serde::Serialize;

use crate::campaign::{self, Options, Outcome};
use crate::error::{LabError, LabResult};
use crate::io::{ensure_dir, write_csv, write_json, write_snapshot};
use crate::scenario::{Integrator, Scenario};

pub const ENERGY_HEADER: [&str; 12] =
    ["t", "E_wave", "E_transport", "E_total", "A", "B", "x_l", "x_r", "slope_l", "slope_r", "defect", "growth_factor"];
pub const PAIR_HEADER: [&str; 5] = ["t", "D_H", "tilde_D_H", "boundary_proximity", "B1+B2"];
pub const SWEEP_HEADER: [&str; 6] = ["delta", "amplification", "c_exp", "c_tilde", "equivalence", "rows"];

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub eps: Option<Vec<f64>>,
    pub level: Option<usize>,
    pub seed: Option<u64>,
    pub delta: Option<Vec<f64>>,
}

impl Overrides {
    /// One scenario per requested ε.
    pub fn apply(&self, base: &Scenario) -> LabResult<Vec<Scenario>> {
        let mut sc = base.clone();
        if let Some(l) = self.level {
            sc.level = l;
        }
        if let Some(s) = self.seed {
            sc.seed = s;
        }
        if let Some(d) = &self.delta {
            sc.delta = d.clone();
        }
        let eps = self.eps.clone().unwrap_or_else(|| vec![sc.eps]);
        if eps.is_empty() {
            return Err(LabError::Config("empty eps list".into()));
        }
        eps.into_iter()
            .map(|e| {
                let mut s = sc.clone();
                s.eps = e;
                s.validate()?;
                Ok(s)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepSummary {
    pub epsilon: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    pub growth_factor: f64,
    pub local_residual: f64,
    pub boundary_shift: f64,
    pub regularization_noop: bool,
}

impl From<&StepReport> for StepSummary {
    fn from(r: &StepReport) -> Self {
        StepSummary {
            epsilon: r.epsilon,
            energy_before: r.energy_before,
            energy_after: r.energy_after,
            growth_factor: r.growth_factor,
            local_residual: r.local_residual,
            boundary_shift: r.boundary_shift,
            regularization_noop: r.regularization_noop,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub scenario: Scenario,
    pub steps: usize,
    pub t_final: f64,
    pub energy_initial: f64,
    pub energy_final: f64,
    /// `max (growth − 1)/ε` over accepted three-step updates.
    pub growth_constant: Option<f64>,
    pub max_local_residual: Option<f64>,
    pub halted: Option<String>,
    pub last_report: Option<StepSummary>,
}

struct Trajectory {
    states: Vec<GoodState>,
    energies: Vec<EnergyReport>,
    reports: Vec<StepReport>,
    halted: Option<CoreError>,
}

fn integrate(sc: &Scenario, init: &GoodState) -> LabResult<Trajectory> {
    let cfg = sc.step_config();
    if sc.t_end <= init.t() {
        let energies = vec![level_energy(init, &cfg)?];
        return Ok(Trajectory { states: vec![init.clone()], energies, reports: Vec::new(), halted: None });
    }
    match sc.integrator {
        Integrator::Threestep => {
            let r = stepper::run(init, sc.t_end, sc.eps, &cfg)?;
            Ok(Trajectory { states: r.states, energies: r.energies, reports: r.reports, halted: r.halted })
        }
        Integrator::Rk4 => {
            let dt = if sc.dt > 0.0 { sc.dt } else { f64::INFINITY };
            let states = rk4_run(init, sc.t_end, dt, System::Full)?;
            let energies = states.iter().map(|s| level_energy(s, &cfg)).collect::<relvac_core::Result<Vec<_>>>()?;
            Ok(Trajectory { states, energies, reports: Vec::new(), halted: None })
        }
    }
}

fn boundary_cells(s: &GoodState) -> [Option<f64>; 4] {
    if s.grid().dim() != 1 {
        return [None; 4];
    }
    match s.boundary() {
        Ok(b) if b.points.len() >= 2 => {
            let (l, r) = (&b.points[0], &b.points[b.points.len() - 1]);
            [Some(l.x[0]), Some(r.x[0]), Some(l.slope), Some(r.slope)]
        }
        _ => [None; 4],
    }
}

fn energy_rows(tr: &Trajectory) -> Vec<Vec<Option<f64>>> {
    tr.states
        .iter()
        .zip(&tr.energies)
        .enumerate()
        .map(|(i, (s, e))| {
            let mut row = vec![Some(s.t()), Some(e.e_wave), Some(e.e_transport), Some(e.e_total), Some(e.a), Some(e.b)];
            row.extend(boundary_cells(s));
            let (defect, growth) = match (i, tr.reports.get(i.wrapping_sub(1))) {
                (0, _) => (None, None),
                (_, Some(r)) => (Some(r.local_residual), Some(r.growth_factor)),
                (_, None) => (None, Some(e.e_total / tr.energies[i - 1].e_total)),
            };
            row.push(defect);
            row.push(growth);
            row
        })
        .collect()
}

fn simulate_one(sc: &Scenario, out: &Path) -> LabResult<SimReport> {
    ensure_dir(out)?;
    let init = sc.initial()?;
    let tr = integrate(sc, &init)?;
    write_csv(&out.join("energy.csv"), &ENERGY_HEADER, &energy_rows(&tr))?;
    let snaps = out.join("snapshots");
    ensure_dir(&snaps)?;
    let last = tr.states.len() - 1;
    for (i, s) in tr.states.iter().enumerate() {
        if i % sc.snapshot_every == 0 || i == last {
            write_snapshot(&snaps.join(format!("step_{i:06}.csv")), s)?;
        }
    }
    let accepted: Vec<&StepReport> = tr.reports.iter().collect();
    let last_report = match &tr.halted {
        Some(CoreError::StepRejected(r)) => Some(StepSummary::from(r.as_ref())),
        _ => accepted.last().map(|r| StepSummary::from(*r)),
    };
    let report = SimReport {
        scenario: sc.clone(),
        steps: last,
        t_final: tr.states[last].t(),
        energy_initial: tr.energies[0].e_total,
        energy_final: tr.energies[last].e_total,
        growth_constant: accepted.iter().map(|r| (r.growth_factor - 1.0) / r.epsilon).reduce(f64::max),
        max_local_residual: accepted.iter().map(|r| r.local_residual).reduce(f64::max),
        halted: tr.halted.as_ref().map(|e| e.to_string()),
        last_report,
    };
    write_json(&out.join("report.json"), &report)?;
    match tr.halted {
        Some(e) => Err(e.into()),
        None => Ok(report),
    }
}

/// One output directory per ε when sweeping, otherwise `out` itself.
pub fn simulate(base: &Scenario, ov: &Overrides, out: &Path) -> LabResult<Vec<SimReport>> {
    let runs = ov.apply(base)?;
    let dirs: Vec<PathBuf> = if runs.len() == 1 { vec![out.to_path_buf()] } else { runs.iter().map(|s| out.join(format!("eps_{}", s.eps))).collect() };
    let results: Vec<LabResult<SimReport>> = runs.par_iter().zip(dirs.par_iter()).map(|(s, d)| simulate_one(s, d)).collect();
    results.into_iter().collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub amplification: f64,
    pub c_exp: f64,
    pub c_tilde: f64,
    pub equivalence: f64,
    pub rows: usize,
}

fn pair_trajectories(sc: &Scenario, a: &GoodState, b: &GoodState) -> LabResult<Vec<(GoodState, GoodState)>> {
    match sc.integrator {
        Integrator::Rk4 => {
            let cap = if sc.dt > 0.0 { sc.dt } else { f64::INFINITY };
            Ok(campaign::paired_rk4(a, b, sc.t_end, cap, sc.pair_every)?)
        }
        Integrator::Threestep => {
            let cfg = sc.step_config();
            let (ra, rb) = rayon::join(|| stepper::run(a, sc.t_end, sc.eps, &cfg), || stepper::run(b, sc.t_end, sc.eps, &cfg));
            let (ra, rb) = (ra?, rb?);
            if let Some(e) = ra.halted.or(rb.halted) {
                return Err(e.into());
            }
            let last = ra.states.len() - 1;
            Ok(ra.states.into_iter().zip(rb.states).enumerate().filter(|(i, _)| i % sc.pair_every == 0 || *i == last).map(|(_, p)| p).collect())
        }
    }
}

pub fn compare(base: &Scenario, ov: &Overrides, out: &Path) -> LabResult<Vec<SweepRow>> {
    let sc = ov.apply(base)?.remove(0);
    ensure_dir(out)?;
    let init = sc.initial()?;
    let cfg = PairConfig::default();
    let sweep = sc
        .delta
        .par_iter()
        .map(|&d| -> LabResult<SweepRow> {
            let other = sc.perturbed(d)?;
            let rows: Vec<PairRow> = pair_trajectories(&sc, &init, &other)?
                .iter()
                .map(|(a, b)| pair_row(a, b, &cfg))
                .collect::<relvac_core::Result<_>>()?;
            let table: Vec<Vec<Option<f64>>> =
                rows.iter().map(|r| vec![Some(r.t), Some(r.d_h), Some(r.tilde_d_h), Some(r.proximity), Some(r.b_sum)]).collect();
            write_csv(&out.join(format!("pair_delta_{d}.csv")), &PAIR_HEADER, &table)?;
            let n = rows.len();
            let rep = summarize(rows);
            Ok(SweepRow { delta: d, amplification: rep.amplification, c_exp: rep.c_exp, c_tilde: rep.c_tilde, equivalence: rep.equivalence, rows: n })
        })
        .collect::<LabResult<Vec<_>>>()?;
    let table: Vec<Vec<Option<f64>>> = sweep
        .iter()
        .map(|r| vec![Some(r.delta), Some(r.amplification), Some(r.c_exp), Some(r.c_tilde), Some(r.equivalence), Some(r.rows as f64)])
        .collect();
    write_csv(&out.join("sweep.csv"), &SWEEP_HEADER, &table)?;
    write_json(&out.join("compare.json"), &serde_json::json!({ "scenario": sc, "sweep": sweep }))?;
    Ok(sweep)
}

/// Runs the criteria and writes `verify.json` when `out` is given; any
/// failure becomes [`LabError::Invariant`] after the report is written.
pub fn verify(ids: &[u32], opts: &Options, out: Option<&Path>, mut each: impl FnMut(&Outcome)) -> LabResult<Vec<Outcome>> {
    let mut outcomes = Vec::new();
    for &id in ids {
        let o = campaign::run_criterion(id, opts);
        each(&o);
        outcomes.push(o);
    }
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_json(&dir.join("verify.json"), &serde_json::json!({ "tampered": opts.tampered, "seed": opts.seed, "outcomes": outcomes }))?;
    }
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.pass).map(|o| format!("criterion {} ({})", o.id, o.title)).collect();
    if failed.is_empty() { Ok(outcomes) } else { Err(LabError::Invariant(failed)) }
}

#[derive(Debug, Clone, Serialize)]
struct InterpRow {
    prop: &'static str,
    j: usize,
    m: usize,
    sigma_m: f64,
    sigma0: f64,
    p0: f64,
    pm: f64,
    ratio: f64,
}

/// Interpolation ratios on the 20-function family with the scenario's
/// initial `r` as weight.
pub fn interp_test(base: &Scenario, out: &Path) -> LabResult<usize> {
    ensure_dir(out)?;
    let st = base.initial()?;
    let fam = smooth_family(st.grid(), 20);
    let mut w = csv::Writer::from_path(out.join("interp.csv"))?;
    let mut bad = Vec::new();
    let mut count = 0;
    for prop in InterpProp::ALL {
        for rep in interp_check(&fam, st.r(), prop)? {
            let e = rep.exponents;
            if !rep.ratio.is_finite() {
                bad.push(format!("{} {e:?}", prop.name()));
            }
            w.serialize(InterpRow { prop: prop.name(), j: e.j, m: e.m, sigma_m: e.sigma_m, sigma0: e.sigma0, p0: e.p0, pm: e.pm, ratio: rep.ratio })?;
            count += 1;
        }
    }
    w.flush()?;
    if bad.is_empty() { Ok(count) } else { Err(LabError::Invariant(bad)) }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityReport {
    pub level: usize,
    pub energy_ratio: f64,
    pub tl1_ratio: Option<f64>,
    pub tl23_ratio: Option<f64>,
}

/// `E^{2k}/‖·‖²` at the scenario's level and the elliptic ratios of the
/// transition operators. Ratios outside `[1/10, 10]` are failures.
pub fn coercivity_test(base: &Scenario, ov: &Overrides, out: &Path) -> LabResult<CoercivityReport> {
    let sc = ov.apply(base)?.remove(0);
    ensure_dir(out)?;
    let st = sc.initial()?;
    let k = sc.level / 2;
    let win = if k == 0 { vec![st.clone()] } else { snapshot_window(&st, k, 0.5 * st.cfl_limit(System::Full))? };
    let (energy_ratio, _) = coercivity_ratio(&win, k)?;
    let fam = smooth_family(st.grid(), 20);
    let (tl1, tl23) = if st.grid().dim() == 1 {
        (
            Some(transition::coercivity_ratio(CoercivityFamily::TL1, &fam, &st)?),
            Some(transition::coercivity_ratio(CoercivityFamily::TL23, &fam, &st)?),
        )
    } else {
        (None, None)
    };
    let rep = CoercivityReport { level: sc.level, energy_ratio, tl1_ratio: tl1, tl23_ratio: tl23 };
    write_json(&out.join("coercivity.json"), &serde_json::json!({ "scenario": sc, "report": rep }))?;
    if !(energy_ratio.is_finite() && (0.1..=10.0).contains(&energy_ratio)) {
        return Err(LabError::Invariant(vec![format!("energy coercivity ratio {energy_ratio}")]));
    }
    Ok(rep)
}

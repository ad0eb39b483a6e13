//! Plain-text scenario files: one `key = value` per line, `#` starts a comment.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `name` | file stem | run label |
//! | `family` | `blob1d` | `blob1d`, `offcenter1d` or `disk2d` |
//! | `h0`, `alpha`, `beta`, `gamma`, `omega` | family defaults | family parameters |
//! | `kappa` | 1 | equation of state exponent |
//! | `n` | 512 | nodes per axis |
//! | `lo`, `hi` | -1.5, 1.5 | box per axis |
//! | `t_end` | 0.2 | final time |
//! | `eps` | 0.005 | step of the three-step scheme |
//! | `dt` | 0 | RK4 step cap (0: CFL only) |
//! | `integrator` | `threestep` | `threestep` or `rk4` |
//! | `level` | 0 | energy level `2k` |
//! | `c_max` | 50 | energy guard constant |
//! | `snapshot_every` | 10 | steps between snapshot files |
//! | `seed` | 1 | RNG seed |
//! | `delta` | `1e-2,1e-3,1e-4` | perturbation sizes for `compare` |
//! | `perturb` | `both` | `shift`, `velocity` or `both` |
//! | `pair_every` | 5 | steps between pair rows for `compare` |

use std::collections::BTreeMap;
use std::path::Path;

use relvac_core::domain::Grid;
use relvac_core::families::Family;
use relvac_core::stepper::StepConfig;
use relvac_core::{GoodState, Params};
use serde::Serialize;

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Threestep,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Perturb {
    Shift,
    Velocity,
    Both,
}

#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub name: String,
    #[serde(skip)]
    pub family: Family,
    pub family_id: String,
    pub family_params: Vec<(String, f64)>,
    pub kappa: f64,
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
    pub t_end: f64,
    pub eps: f64,
    pub dt: f64,
    pub integrator: Integrator,
    pub level: usize,
    pub c_max: f64,
    pub snapshot_every: usize,
    pub seed: u64,
    pub delta: Vec<f64>,
    pub perturb: Perturb,
    pub pair_every: usize,
}

const BUILTIN: &[(&str, &str)] = &[
    ("blob1d", include_str!("../scenarios/blob1d.cfg")),
    ("offcenter1d", include_str!("../scenarios/offcenter1d.cfg")),
    ("disk2d", include_str!("../scenarios/disk2d.cfg")),
];

fn cfg(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> LabResult<T> {
    v.parse().map_err(|_| cfg(format!("{key}: cannot parse `{v}`")))
}

impl Scenario {
    /// A file path, or the name of a bundled scenario.
    pub fn load(spec: &str) -> LabResult<Self> {
        let path = Path::new(spec);
        if path.exists() {
            let text = std::fs::read_to_string(path)?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
            return Self::parse(&text, stem);
        }
        match BUILTIN.iter().find(|(n, _)| *n == spec) {
            Some((n, text)) => Self::parse(text, n),
            None => Err(cfg(format!("no scenario file or bundled scenario named `{spec}`"))),
        }
    }

    pub fn parse(text: &str, default_name: &str) -> LabResult<Self> {
        let mut kv = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| cfg(format!("line {}: expected key = value", i + 1)))?;
            if kv.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(cfg(format!("line {}: duplicate key `{}`", i + 1, k.trim())));
            }
        }
        let take = |kv: &mut BTreeMap<String, String>, k: &str| kv.remove(k);
        let family_id = take(&mut kv, "family").unwrap_or_else(|| "blob1d".into());
        let mut family = Family::by_id(&family_id).map_err(|_| cfg(format!("unknown family `{family_id}`")))?;
        for key in ["h0", "alpha", "beta", "gamma", "omega"] {
            if let Some(v) = take(&mut kv, key) {
                family.set(key, num(key, &v)?).map_err(|_| cfg(format!("family `{family_id}` has no parameter `{key}`")))?;
            }
        }
        let two_d = family.dim() == 2;
        let mut s = Scenario {
            name: take(&mut kv, "name").unwrap_or_else(|| default_name.to_string()),
            family_params: family.params().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            family,
            family_id,
            kappa: 1.0,
            n: 512,
            lo: if two_d { -1.4 } else { -1.5 },
            hi: if two_d { 1.4 } else { 1.5 },
            t_end: 0.2,
            eps: 0.005,
            dt: 0.0,
            integrator: Integrator::Threestep,
            level: 0,
            c_max: 50.0,
            snapshot_every: 10,
            seed: 1,
            delta: vec![1e-2, 1e-3, 1e-4],
            perturb: Perturb::Both,
            pair_every: 5,
        };
        for (k, v) in std::mem::take(&mut kv) {
            match k.as_str() {
                "kappa" => s.kappa = num(&k, &v)?,
                "n" => s.n = num(&k, &v)?,
                "lo" => s.lo = num(&k, &v)?,
                "hi" => s.hi = num(&k, &v)?,
                "t_end" => s.t_end = num(&k, &v)?,
                "eps" => s.eps = num(&k, &v)?,
                "dt" => s.dt = num(&k, &v)?,
                "level" => s.level = num(&k, &v)?,
                "c_max" => s.c_max = num(&k, &v)?,
                "snapshot_every" => s.snapshot_every = num(&k, &v)?,
                "seed" => s.seed = num(&k, &v)?,
                "pair_every" => s.pair_every = num(&k, &v)?,
                "integrator" => {
                    s.integrator = match v.as_str() {
                        "threestep" => Integrator::Threestep,
                        "rk4" => Integrator::Rk4,
                        _ => return Err(cfg(format!("integrator: `{v}` is not threestep or rk4"))),
                    }
                }
                "perturb" => {
                    s.perturb = match v.as_str() {
                        "shift" => Perturb::Shift,
                        "velocity" => Perturb::Velocity,
                        "both" => Perturb::Both,
                        _ => return Err(cfg(format!("perturb: `{v}` is not shift, velocity or both"))),
                    }
                }
                "delta" => s.delta = v.split(',').map(|x| num("delta", x.trim())).collect::<LabResult<_>>()?,
                _ => return Err(cfg(format!("unknown key `{k}`"))),
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> LabResult<()> {
        if !(self.kappa > 0.0) {
            return Err(cfg("kappa must be positive"));
        }
        if self.n < 16 || self.n > 8192 {
            return Err(cfg("n must lie in 16..=8192"));
        }
        if !(self.lo < self.hi) {
            return Err(cfg("need lo < hi"));
        }
        if !(self.t_end >= 0.0) || !(self.eps > 0.0) || !(self.dt >= 0.0) {
            return Err(cfg("need t_end >= 0, eps > 0, dt >= 0"));
        }
        if self.integrator == Integrator::Threestep && self.t_end / self.eps > 1e5 {
            return Err(cfg("t_end / eps exceeds 1e5 steps"));
        }
        if self.level % 2 == 1 || self.level > 4 {
            return Err(cfg("level must be 0, 2 or 4"));
        }
        if self.family.dim() == 2 && self.t_end > 0.0 {
            return Err(cfg("free-boundary time stepping is one-dimensional; use t_end = 0 for disk2d"));
        }
        if !self.c_max.is_finite() {
            return Err(cfg("c_max must be finite"));
        }
        if self.delta.iter().any(|d| !(d.is_finite())) || self.snapshot_every == 0 || self.pair_every == 0 {
            return Err(cfg("delta must be finite; snapshot_every and pair_every positive"));
        }
        Ok(())
    }

    pub fn params(&self) -> LabResult<Params> {
        Ok(Params::new(self.kappa, self.family.dim())?)
    }

    pub fn grid(&self) -> LabResult<Grid> {
        Ok(if self.family.dim() == 1 {
            Grid::new_1d(self.lo, self.hi, self.n)?
        } else {
            Grid::new_2d([self.lo; 2], [self.hi; 2], [self.n; 2])?
        })
    }

    pub fn initial(&self) -> LabResult<GoodState> {
        Ok(self.family.state(self.params()?, self.grid()?)?)
    }

    /// Partner state for `compare` at perturbation size `delta`.
    pub fn perturbed(&self, delta: f64) -> LabResult<GoodState> {
        let (shift, dv) = match self.perturb {
            Perturb::Shift => (delta, 0.0),
            Perturb::Velocity => (0.0, delta),
            Perturb::Both => (delta, delta),
        };
        Ok(self.family.perturbed_state(self.params()?, self.grid()?, [shift, 0.0], dv)?)
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig { level: self.level, c_max: self.c_max, ..StepConfig::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let s = Scenario::load("blob1d").unwrap();
        assert_eq!((s.n, s.kappa, s.t_end), (512, 1.0, 0.2));
        assert!(s.family_params.iter().any(|(k, v)| k == "h0" && *v == 0.06));
        let s = Scenario::parse("family = offcenter1d\ngamma = 0.1 # tilt\nn = 256\nintegrator = rk4\n", "x").unwrap();
        assert_eq!(s.n, 256);
        assert_eq!(s.integrator, Integrator::Rk4);
        assert!(s.family_params.iter().any(|(k, v)| k == "gamma" && *v == 0.1));
    }

    #[test]
    fn rejects_bad_input() {
        for bad in ["n = ten", "colour = red", "family = torus", "level = 3", "integrator = euler", "kappa = -1", "blob", "n = 64\nn = 32", "gamma = 0.1"] {
            let e = Scenario::parse(bad, "x").unwrap_err();
            assert_eq!(e.exit_code(), 4, "{bad}");
        }
        assert!(Scenario::load("no-such-scenario").is_err());
        assert!(Scenario::parse("family = disk2d\nt_end = 0.1", "x").is_err());
    }

    #[test]
    fn bundled_scenarios_load() {
        for (name, _) in BUILTIN {
            let s = Scenario::load(name).unwrap();
            assert_eq!(&s.name, name);
            s.initial().unwrap();
        }
    }
}

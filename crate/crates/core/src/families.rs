//! Shipped initial data and the smooth test family used by the
//! interpolation harness.
//!
//! The density profiles are signed polynomials: `h₀(1−|x|²)` is used on both
//! sides of the boundary, so the fluid is exactly the unit ball and `r`
//! doubles as its defining function.

use alloc::vec::Vec;

use crate::domain::{Field, Grid};
use crate::dynamics::GoodState;
use crate::goodvars::Params;
use crate::math::cos;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `r = h₀(1−x²)`, `v = αx(1−x²) + β`.
    Blob1d { h0: f64, alpha: f64, beta: f64 },
    /// `r = h₀(1−x²)(1+γx)`, same velocity as the blob.
    Offcenter1d { h0: f64, gamma: f64, alpha: f64, beta: f64 },
    /// `r = h₀(1−|x|²)`, `v = αx(1−|x|²) + Ω x^⊥`.
    Disk2d { h0: f64, alpha: f64, omega: f64 },
}

impl Family {
    pub fn blob1d() -> Self {
        Family::Blob1d { h0: 0.06, alpha: 0.08, beta: 0.0 }
    }

    pub fn offcenter1d() -> Self {
        Family::Offcenter1d { h0: 0.06, gamma: 0.3, alpha: 0.08, beta: 0.0 }
    }

    pub fn disk2d() -> Self {
        Family::Disk2d { h0: 0.06, alpha: 0.08, omega: 0.0 }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Family::Blob1d { .. } => "blob1d",
            Family::Offcenter1d { .. } => "offcenter1d",
            Family::Disk2d { .. } => "disk2d",
        }
    }

    /// Family with default parameters by identifier.
    pub fn by_id(id: &str) -> Result<Self> {
        match id {
            "blob1d" => Ok(Self::blob1d()),
            "offcenter1d" => Ok(Self::offcenter1d()),
            "disk2d" => Ok(Self::disk2d()),
            _ => Err(Error::InvalidParams("unknown initial-data family")),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Family::Disk2d { .. } => 2,
            _ => 1,
        }
    }

    /// Replace one named parameter.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match (self, key) {
            (Family::Blob1d { h0, .. }, "h0")
            | (Family::Offcenter1d { h0, .. }, "h0")
            | (Family::Disk2d { h0, .. }, "h0") => h0,
            (Family::Blob1d { alpha, .. }, "alpha")
            | (Family::Offcenter1d { alpha, .. }, "alpha")
            | (Family::Disk2d { alpha, .. }, "alpha") => alpha,
            (Family::Blob1d { beta, .. }, "beta") | (Family::Offcenter1d { beta, .. }, "beta") => beta,
            (Family::Offcenter1d { gamma, .. }, "gamma") => gamma,
            (Family::Disk2d { omega, .. }, "omega") => omega,
            _ => return Err(Error::InvalidParams("parameter not defined for this family")),
        };
        *slot = value;
        Ok(())
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Family::Blob1d { h0, alpha, beta } => alloc::vec![("h0", h0), ("alpha", alpha), ("beta", beta)],
            Family::Offcenter1d { h0, gamma, alpha, beta } => {
                alloc::vec![("h0", h0), ("gamma", gamma), ("alpha", alpha), ("beta", beta)]
            }
            Family::Disk2d { h0, alpha, omega } => alloc::vec![("h0", h0), ("alpha", alpha), ("omega", omega)],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Family::Blob1d { h0, .. } | Family::Disk2d { h0, .. } => h0 > 0.0,
            Family::Offcenter1d { h0, gamma, .. } => h0 > 0.0 && gamma.abs() < 1.0,
        };
        if ok { Ok(()) } else { Err(Error::InvalidParams("need h0 > 0 and |gamma| < 1")) }
    }

    pub fn r_at(&self, x: [f64; 2]) -> f64 {
        match *self {
            Family::Blob1d { h0, .. } => h0 * (1.0 - x[0] * x[0]),
            Family::Offcenter1d { h0, gamma, .. } => h0 * (1.0 - x[0] * x[0]) * (1.0 + gamma * x[0]),
            Family::Disk2d { h0, .. } => h0 * (1.0 - x[0] * x[0] - x[1] * x[1]),
        }
    }

    pub fn v_at(&self, x: [f64; 2]) -> [f64; 2] {
        match *self {
            Family::Blob1d { alpha, beta, .. } | Family::Offcenter1d { alpha, beta, .. } => {
                [alpha * x[0] * (1.0 - x[0] * x[0]) + beta, 0.0]
            }
            Family::Disk2d { alpha, omega, .. } => {
                let q = 1.0 - x[0] * x[0] - x[1] * x[1];
                [alpha * x[0] * q - omega * x[1], alpha * x[1] * q + omega * x[0]]
            }
        }
    }

    /// Initial state on `grid`.
    pub fn state(&self, params: Params, grid: Grid) -> Result<GoodState> {
        self.validate()?;
        if params.dim != self.dim() {
            return Err(Error::Mismatch);
        }
        GoodState::from_fn(params, grid, |x| self.r_at(x), |x| self.v_at(x), 0.0)
    }

    /// Initial state translated by `shift`, with `delta_v` added to every velocity component.
    pub fn perturbed_state(&self, params: Params, grid: Grid, shift: [f64; 2], delta_v: f64) -> Result<GoodState> {
        self.validate()?;
        if params.dim != self.dim() {
            return Err(Error::Mismatch);
        }
        let back = |x: [f64; 2]| [x[0] - shift[0], x[1] - shift[1]];
        GoodState::from_fn(
            params,
            grid,
            |x| self.r_at(back(x)),
            |x| {
                let v = self.v_at(back(x));
                [v[0] + delta_v, v[1] + if grid.dim() == 2 { delta_v } else { 0.0 }]
            },
            0.0,
        )
    }

    /// Closed-form boundary roots and `|∂r|` there (d = 1 families).
    pub fn roots_and_slopes(&self) -> Option<[(f64, f64); 2]> {
        match *self {
            Family::Blob1d { h0, .. } => Some([(-1.0, 2.0 * h0), (1.0, 2.0 * h0)]),
            Family::Offcenter1d { h0, gamma, .. } => {
                Some([(-1.0, 2.0 * h0 * (1.0 - gamma)), (1.0, 2.0 * h0 * (1.0 + gamma))])
            }
            Family::Disk2d { .. } => None,
        }
    }
}

/// `n` smooth test functions of mixed frequency and phase.
pub fn smooth_family(grid: &Grid, n: usize) -> Vec<Field> {
    (0..n)
        .map(|k| {
            let kf = k as f64;
            let om = 0.5 + 0.35 * kf;
            let ph = 0.7 * kf;
            let c = 0.2 * ((k % 5) as f64) - 0.4;
            Field::scalar_from_fn(*grid, |x| {
                cos(om * x[0] + ph) * cos(0.6 * om * x[1]) + c * x[0] * x[0] + 0.1 * x[1]
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::locate_boundary;

    #[test]
    fn closed_form_boundaries() {
        let g = Grid::new_1d(-1.5, 1.5, 301).unwrap();
        let p = Params::default();
        for fam in [Family::blob1d(), Family::offcenter1d()] {
            let s = fam.state(p, g).unwrap();
            let b = locate_boundary(s.r().comp(0), &g).unwrap();
            let exact = fam.roots_and_slopes().unwrap();
            assert_eq!(b.points.len(), 2);
            for (pt, (x, sl)) in b.points.iter().zip(exact) {
                assert!((pt.x[0] - x).abs() < 1e-10, "{} {x}", pt.x[0]);
                assert!((pt.slope - sl).abs() < 1e-6 * sl.max(1.0), "{} {sl}", pt.slope);
            }
        }
    }

    #[test]
    fn ids_and_setters() {
        let mut f = Family::by_id("offcenter1d").unwrap();
        f.set("gamma", 0.1).unwrap();
        assert!(matches!(f, Family::Offcenter1d { gamma, .. } if gamma == 0.1));
        assert!(f.set("omega", 1.0).is_err());
        assert!(Family::by_id("nope").is_err());
        let g = Grid::new_1d(-1.5, 1.5, 64).unwrap();
        let mut bad = Family::offcenter1d();
        bad.set("gamma", 1.5).unwrap();
        assert!(bad.state(Params::default(), g).is_err());
    }

    #[test]
    fn disk_builds() {
        let g = Grid::new_2d([-1.5, -1.5], [1.5, 1.5], [48, 48]).unwrap();
        let s = Family::disk2d().state(Params::new(1.0, 2).unwrap(), g).unwrap();
        assert!(s.mask().count_inside() > 0);
    }

    #[test]
    fn family_is_nontrivial() {
        let g = Grid::new_1d(-1.25, 1.25, 64).unwrap();
        let fam = smooth_family(&g, 20);
        assert_eq!(fam.len(), 20);
        for f in &fam {
            assert!(f.as_slice().iter().any(|v| v.abs() > 1e-3));
        }
    }
}

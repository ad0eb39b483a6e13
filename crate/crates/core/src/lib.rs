//! Eulerian numerics for the relativistic free-boundary Euler equations with a
//! physical vacuum boundary, written in the good variables `(r, v)`.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! computation on immutable inputs; file formats, scenario handling and the
//! command line front end live in the companion `relvac-lab` crate.
//!
//! Module map:
//!
//! - [`goodvars`]: equation of state, physical/good variable conversion and the
//!   pointwise coefficient bundle `v⁰, ⟨r⟩, G, a₀…a₃`.
//! - [`domain`]: ambient grid, fields, sub-grid boundary location, weighted
//!   quadrature over `{r > 0}`, interpolation and resampling.
//! - [`stencil`]: finite difference operators restricted to a node support.
//! - [`spaces`]: weighted Sobolev norms, the control norms `A` and `B`, and the
//!   interpolation-inequality harness.
//! - [`dynamics`]: the evolution equations, vorticity transport, residuals,
//!   scaling and the reference RK4 integrator.
//! - [`stepper`]: the regularize / transport / Newton one-step scheme.
//! - [`transition`]: the degenerate second order operators `L₁, L₂, L₃` and
//!   their variants.
//! - [`linearized`]: the linearized system and its energy.
//! - [`energy`]: good derived variables, `E^{2k}` and the Gronwall monitor.
//! - [`distance`]: two-solution distance functionals.
//! - [`families`]: closed-form initial data and smooth test-function families.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod distance;
pub mod domain;
pub mod dynamics;
pub mod energy;
mod error;
pub mod families;
pub mod fit;
pub mod goodvars;
pub mod linearized;
mod math;
pub mod spaces;
pub mod stencil;
pub mod stepper;
pub mod transition;

pub use domain::{Boundary, BoundaryPoint, Field, Grid, Mask};
pub use dynamics::GoodState;
pub use error::{Error, Result};
pub use goodvars::Params;

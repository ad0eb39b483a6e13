//! Scenario files, run artifacts and the verification campaign around
//! `relvac-core`. The `relvac` binary is a thin layer over [`commands`].

pub mod campaign;
pub mod commands;
pub mod error;
pub mod io;
pub mod scenario;

pub use error::{LabError, LabResult};
pub use scenario::Scenario;

use alloc::boxed::Box;
use alloc::string::String;

use crate::stepper::StepReport;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(&'static str),
    #[error("domain error: {what} = {value}")]
    Domain { what: &'static str, value: f64 },
    #[error("velocity violates the unit time-like constraint (residual {residual:e})")]
    ConstraintViolation { residual: f64 },
    #[error("inadmissible state: a0 = {a0:e} at node {node}")]
    Inadmissible { a0: f64, node: usize },
    #[error("boundary slope {slope} outside [{min}, {max}]")]
    SlopeOutOfRange { slope: f64, min: f64, max: f64 },
    #[error("degenerate domain: r has no sign change on the grid")]
    DegenerateDomain,
    #[error("weight exponent {sigma} is not integrable against a simple zero")]
    DivergentWeight { sigma: f64 },
    #[error("scattered data leave grid node {node} uncovered")]
    CoverageGap { node: usize },
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error("time step {dt} exceeds the CFL limit {limit}")]
    Cfl { dt: f64, limit: f64 },
    #[error("transport map folds over near scattered point {index}")]
    FoldOver { index: usize },
    #[error("step rejected: growth factor {} exceeds the guard", .0.growth_factor)]
    StepRejected(Box<StepReport>),
    #[error("need at least {needed} snapshots, got {got}")]
    InsufficientSnapshots { needed: usize, got: usize },
    #[error("snapshots are not uniformly spaced in time")]
    NonUniformSnapshots,
    #[error("boundaries are {gap} apart, beyond the closeness threshold")]
    BoundariesApart { gap: f64 },
    #[error("domains do not intersect")]
    EmptyIntersection,
    #[error("control norm A = {a} exceeds the smallness budget {limit}")]
    ControlTooLarge { a: f64, limit: f64 },
    #[error("scaled state leaves the ambient box")]
    OutOfBox,
    #[error("fields live on different grids or components")]
    Mismatch,
    #[error("trajectories are not aligned in time")]
    Misaligned,
    #[error("inadmissible exponents: {0}")]
    InadmissibleExponents(String),
    #[error("test family must contain a nontrivial function")]
    TrivialFamily,
}

//! Thin re-exports of `libm` so numeric code reads the same with or without std.

pub(crate) use libm::{cos, exp, fabs as abs, floor, log, pow, sqrt};

//! Least-squares fits used by the convergence and growth monitors.

use alloc::vec::Vec;

use crate::math::log;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::Mismatch);
    }
    if x.len() < 2 {
        return Err(Error::InsufficientSnapshots { needed: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidParams("abscissae must not all coincide"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).abs()).fold(0.0, f64::max);
    Ok(LineFit { slope, intercept, max_residual })
}

/// Fit of `y ≈ C x^p` in log-log coordinates; every value must be positive.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(Error::Domain { what: "log-log sample", value: x.iter().chain(y).cloned().fold(f64::INFINITY, f64::min) });
    }
    let lx: Vec<f64> = x.iter().map(|&v| log(v)).collect();
    let ly: Vec<f64> = y.iter().map(|&v| log(v)).collect();
    line_fit(&lx, &ly)
}

/// `max/min` of positive samples; the spread of a family of constants.
pub fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law() {
        let x = [1e-2, 5e-3, 2.5e-3];
        let y: Vec<f64> = x.iter().map(|e| 3.0 * e * e).collect();
        let f = loglog_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 3f64.ln()).abs() < 1e-10);
        assert!(loglog_fit(&x, &[1.0, 0.0, 1.0]).is_err());
        assert!(line_fit(&[1.0], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn recovers_lines(a in -5.0..5.0f64, b in -5.0..5.0f64) {
            let x = [0.0, 1.0, 2.5, 4.0];
            let y: Vec<f64> = x.iter().map(|t| a * t + b).collect();
            let f = line_fit(&x, &y).unwrap();
            prop_assert!((f.slope - a).abs() < 1e-10 && (f.intercept - b).abs() < 1e-10);
        }
    }
}

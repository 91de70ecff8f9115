//! Post-processing that turns simulations into pass/fail experiment reports.

mod experiments;
mod report;

pub use experiments::*;
pub use report::{Check, CheckOp, ExperimentReport};

use crate::dynamics::StatSeries;
use crate::error::{invalid, Result};

/// Least-squares line through `(t, log value)` on a window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// Ordinary least squares `y = slope·x + intercept`, with `r²` and the slope's
/// standard error. A constant `y` has `r² = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_se: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return invalid("a line fit needs at least two (x, y) pairs");
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    if y.iter().all(|v| *v == y[0]) {
        if !x.iter().any(|v| *v != x[0]) {
            return invalid("a line fit needs at least two distinct x values");
        }
        return Ok(LineFit { slope: 0.0, intercept: y[0], r_squared: 1.0, slope_se: 0.0 });
    }
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if !(sxx > 0.0) {
        return invalid("a line fit needs at least two distinct x values");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    let slope_se = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LineFit { slope, intercept, r_squared, slope_se })
}

/// The default fit window: the series span without its first 20%.
pub fn default_window(series: &StatSeries) -> (f64, f64) {
    let (lo, hi) = (series.times[0], *series.times.last().unwrap_or(&series.times[0]));
    (lo + 0.2 * (hi - lo), hi)
}

/// Fits `log value ≈ slope·t + intercept` on `window`; the decay exponent is
/// `−slope`.
pub fn fit_exponential_rate(series: &StatSeries, window: (f64, f64)) -> Result<RateFit> {
    let w = series.window(window.0, window.1);
    if w.len() < 2 {
        return invalid(format!("fewer than two points in window [{}, {}]", window.0, window.1));
    }
    if let Some(v) = w.values.iter().find(|v| !(**v > 0.0)) {
        return invalid(format!("non-positive value {v} in the fit window"));
    }
    let logs: Vec<f64> = w.values.iter().map(|v| v.ln()).collect();
    let f = fit_line(&w.times, &logs)?;
    Ok(RateFit { slope: f.slope, intercept: f.intercept, r_squared: f.r_squared, window, points: w.len() })
}

/// Mean and standard error of a sample.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

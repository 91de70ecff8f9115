use super::{EmpiricalMeasure, Measure};
use crate::error::{invalid, Error, Result};

/// One linear piece `u ↦ q0 + (q1 - q0)(u - u0)/(u1 - u0)` of a quantile
/// function on `[u0, u1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantileSegment {
    pub u0: f64,
    pub u1: f64,
    pub q0: f64,
    pub q1: f64,
}

impl QuantileSegment {
    fn at(&self, u: f64) -> f64 {
        if self.q0 == self.q1 || self.u1 <= self.u0 {
            return self.q0;
        }
        self.q0 + (self.q1 - self.q0) * (u - self.u0) / (self.u1 - self.u0)
    }
}

/// Piecewise-linear quantile function of a 1-D measure.
///
/// Atoms give constant pieces. A grid density is read as constant on each
/// cell (cell mass from the trapezoid rule), which makes the quantile linear
/// on each cell.
pub fn quantile_segments(m: &Measure) -> Result<Vec<QuantileSegment>> {
    if m.dim() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "quantile functions need 1-d measures, got d = {}",
            m.dim()
        )));
    }
    let mut segs = Vec::new();
    let mut cum = 0.0;
    match m {
        Measure::Grid(g) => {
            let nodes = g.grid().points();
            let d = g.density();
            let h = g.grid().step();
            for j in 0..nodes.len() - 1 {
                let mass = 0.5 * h * (d[j] + d[j + 1]);
                if mass > 0.0 {
                    segs.push(QuantileSegment {
                        u0: cum,
                        u1: cum + mass,
                        q0: nodes[j],
                        q1: nodes[j + 1],
                    });
                    cum += mass;
                }
            }
        }
        _ => {
            let d = m.to_discrete();
            let mut atoms: Vec<(f64, f64)> = d
                .points()
                .iter()
                .cloned()
                .zip(d.weights().iter().cloned())
                .filter(|(_, w)| *w > 0.0)
                .collect();
            atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (x, w) in atoms {
                segs.push(QuantileSegment {
                    u0: cum,
                    u1: cum + w,
                    q0: x,
                    q1: x,
                });
                cum += w;
            }
        }
    }
    if let Some(last) = segs.last_mut() {
        last.u1 = 1.0;
    }
    Ok(segs)
}

/// `∫_0^L |f|^p` for `f` linear from `f0` to `f1`.
fn linear_power_integral(f0: f64, f1: f64, len: f64, p: f64) -> f64 {
    if len <= 0.0 {
        return 0.0;
    }
    if f0 == f1 {
        return len * f0.abs().powf(p);
    }
    if f0 * f1 < 0.0 {
        let r = f0 / (f0 - f1);
        return len * (r * f0.abs().powf(p) + (1.0 - r) * f1.abs().powf(p)) / (p + 1.0);
    }
    let (a, b) = (f0.abs(), f1.abs());
    let span = (b - a).abs();
    if span <= 1e-12 * a.max(b) {
        return len * (0.5 * (a + b)).powf(p);
    }
    len * (b.powf(p + 1.0) - a.powf(p + 1.0)) / ((p + 1.0) * (b - a))
}

/// `W_p` between two 1-D measures via their quantile functions.
///
/// Exact for atomic inputs of any sizes and weights, and for grid densities
/// under the cell-constant reading of [`quantile_segments`].
pub fn wasserstein_1d(m: &Measure, m2: &Measure, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return invalid(format!("Wasserstein order p = {p} must be >= 1"));
    }
    if m.dim() != 1 || m2.dim() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "wasserstein_1d needs 1-d measures, got d = {} and d = {}",
            m.dim(),
            m2.dim()
        )));
    }
    let a = quantile_segments(m)?;
    let b = quantile_segments(m2)?;
    let (mut i, mut j) = (0, 0);
    let mut u = 0.0;
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        let end = a[i].u1.min(b[j].u1);
        if end > u {
            let f0 = a[i].at(u) - b[j].at(u);
            let f1 = a[i].at(end) - b[j].at(end);
            total += linear_power_integral(f0, f1, end - u, p);
            u = end;
        }
        if a[i].u1 <= end {
            i += 1;
        }
        if b[j].u1 <= end {
            j += 1;
        }
    }
    Ok(total.max(0.0).powf(1.0 / p))
}

/// Optimal assignment (Hungarian method, O(n^3)) for a square cost matrix.
/// Returns `assign[i] = j`.
pub(crate) fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    assign
}

/// Largest cloud size accepted by [`wasserstein_exact`].
pub const EXACT_MAX_ATOMS: usize = 64;

/// Exact `W_p` between two equal-size clouds in any dimension, by optimal
/// assignment on the `|x_i - y_j|^p` cost matrix.
pub fn wasserstein_exact(m: &EmpiricalMeasure, m2: &EmpiricalMeasure, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return invalid(format!("Wasserstein order p = {p} must be >= 1"));
    }
    if m.dim() != m2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "clouds in dimensions {} and {}",
            m.dim(),
            m2.dim()
        )));
    }
    let n = m.len();
    if m2.len() != n {
        return invalid(format!("exact assignment needs equal sizes, got {n} and {}", m2.len()));
    }
    if n > EXACT_MAX_ATOMS {
        return Err(Error::Unsupported(format!(
            "exact assignment is limited to {EXACT_MAX_ATOMS} atoms, got {n}"
        )));
    }
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cost[i * n + j] = super::dist2(m.point(i), m2.point(j)).sqrt().powf(p);
        }
    }
    let assign = hungarian(&cost, n);
    let total: f64 = assign.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok((total / n as f64).powf(1.0 / p))
}

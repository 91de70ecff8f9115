use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{quantile_segments, EmpiricalMeasure, GridMeasure1D, Measure, QuantileSegment};
use crate::error::{invalid, Error, Result};

/// Fournier–Guillin rate `δ_{N,p}` for the `W_p` convergence of an i.i.d.
/// empirical measure in dimension `d`.
///
/// The three cases are
/// * `p > d/2`, `p ≠ 1`: `N^{-1/2} + N^{-(2-p)/2}`
/// * `d = 2p`, `p ≠ 1`: `N^{-1/2} log(1+N) + N^{-(2-p)/2}`
/// * `p < d/2`, `d/(d-p) ≠ 2`: `N^{-p/d} + N^{-(2-p)/2}`
///
/// Parameters outside these cases (notably `p = 1` with `d ≤ 2`) are reported
/// as [`Error::Unsupported`].
pub fn fournier_guillin_delta(n: usize, p: f64, d: usize) -> Result<f64> {
    if n == 0 {
        return invalid("N must be at least 1");
    }
    if d == 0 {
        return invalid("dimension must be at least 1");
    }
    if !(p > 0.0 && p < 2.0) {
        return invalid(format!("p = {p} must lie in (0, 2)"));
    }
    let nf = n as f64;
    let df = d as f64;
    let eq = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    let tail = nf.powf(-(2.0 - p) / 2.0);
    let p_is_one = eq(p, 1.0);
    if p > df / 2.0 && !eq(p, df / 2.0) && !p_is_one {
        Ok(nf.powf(-0.5) + tail)
    } else if eq(df, 2.0 * p) && !p_is_one {
        Ok(nf.powf(-0.5) * (1.0 + nf).ln() + tail)
    } else if p < df / 2.0 && !eq(p, df / 2.0) && !eq(df / (df - p), 2.0) {
        Ok(nf.powf(-p / df) + tail)
    } else {
        Err(Error::Unsupported(format!(
            "no Fournier-Guillin rate for p = {p}, d = {d}"
        )))
    }
}

/// `H(μ|ν) = ∫ log(dμ/dν) dμ` for two densities on the same grid.
pub fn relative_entropy(mu: &GridMeasure1D, nu: &GridMeasure1D) -> Result<f64> {
    if mu.grid() != nu.grid() {
        return invalid("relative entropy needs both densities on the same grid");
    }
    let nodes = mu.grid().points();
    let mut vals = Vec::with_capacity(nodes.len());
    for ((&a, &b), &x) in mu.density().iter().zip(nu.density()).zip(&nodes) {
        if a == 0.0 {
            vals.push(0.0);
        } else if b == 0.0 {
            return Err(Error::NotAbsolutelyContinuous { at: x });
        } else {
            vals.push(a * (a / b).ln());
        }
    }
    Ok(mu.grid().integrate(&vals))
}

/// `∫ |x|^k dm` for `k ≥ 1`.
pub fn moment(m: &Measure, k: u32) -> Result<f64> {
    if k == 0 {
        return invalid("moment order must be positive");
    }
    Ok(match m {
        Measure::Grid(g) => g.integrate(|x| x.abs().powi(k as i32)),
        Measure::Empirical(e) => e.view().abs_moment(k as f64),
        Measure::Discrete(d) => d.view().abs_moment(k as f64),
    })
}

fn invert(segs: &[QuantileSegment], u: f64) -> f64 {
    let k = segs.partition_point(|s| s.u1 <= u).min(segs.len() - 1);
    let s = segs[k];
    if s.u1 > s.u0 {
        s.q0 + (s.q1 - s.q0) * ((u - s.u0) / (s.u1 - s.u0)).clamp(0.0, 1.0)
    } else {
        s.q0
    }
}

/// `n` i.i.d. draws from a grid density by inverse CDF.
pub fn sample(m: &GridMeasure1D, n: usize, seed: u64) -> Result<EmpiricalMeasure> {
    sample_measure(&Measure::Grid(m.clone()), n, seed)
}

/// `n` i.i.d. draws from any measure; atoms are picked by their weights.
pub fn sample_measure(m: &Measure, n: usize, seed: u64) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return invalid("sample size must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match m {
        Measure::Grid(_) => {
            let segs = quantile_segments(m)?;
            let pts = (0..n).map(|_| invert(&segs, rng.gen::<f64>())).collect();
            EmpiricalMeasure::from_1d(pts)
        }
        _ => {
            let d = m.to_discrete();
            let mut cum = Vec::with_capacity(d.len());
            let mut acc = 0.0;
            for w in d.weights() {
                acc += w;
                cum.push(acc);
            }
            let mut pts = Vec::with_capacity(n * d.dim());
            for _ in 0..n {
                let u = rng.gen::<f64>() * acc;
                let k = cum.partition_point(|c| *c <= u).min(d.len() - 1);
                pts.extend_from_slice(d.point(k));
            }
            EmpiricalMeasure::new(d.dim(), pts)
        }
    }
}

use std::time::Instant;

use rayon::prelude::*;

use super::{check_blow_up, ParticleState, SdeConfig, StatSeries};
use crate::error::{invalid, Error, Result};
use crate::game::GameInstance;
use crate::measures::{wasserstein_1d, AtomView, EmpiricalMeasure, Measure};
use crate::rng::NoiseStreams;

/// Below this many particles per-particle work stays on the calling thread.
const PAR_MIN: usize = 128;

/// How the interaction term is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DriftPath {
    /// Whole-sum-minus-self on linear statistics when the cost has them,
    /// otherwise the pairwise sum.
    #[default]
    Auto,
    /// Always the O(N²) pairwise leave-one-out sum.
    General,
}

impl DriftPath {
    pub fn name(self) -> &'static str {
        match self {
            DriftPath::Auto => "auto",
            DriftPath::General => "general",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SimulationOptions {
    pub path: DriftPath,
    /// 1-D reference measure for a `W₂(μ^N_t, reference)` series.
    pub reference: Option<Measure>,
    /// Keep the particle state at every recorded time.
    pub snapshots: bool,
    /// Noise stream id of each particle; defaults to its index.
    pub noise_ids: Option<Vec<u64>>,
    /// Drop the Brownian term (pure gradient flow).
    pub noiseless: bool,
}

#[derive(Clone, Debug)]
pub struct SimulationResult {
    pub replica: usize,
    pub final_state: ParticleState,
    /// `second_moment`, `mean` (first coordinate) and, with a reference,
    /// `w2_reference`.
    pub series: Vec<StatSeries>,
    pub snapshots: Vec<ParticleState>,
    pub warnings: Vec<String>,
}

impl SimulationResult {
    pub fn series(&self, label: &str) -> Option<&StatSeries> {
        self.series.iter().find(|s| s.label == label)
    }
}

fn for_each_particle(d: usize, out: &mut [f64], f: impl Fn(usize, &mut [f64]) + Sync + Send) {
    if out.len() / d >= PAR_MIN {
        out.par_chunks_mut(d).enumerate().with_min_len(PAR_MIN / 2).for_each(|(i, o)| f(i, o));
    } else {
        out.chunks_mut(d).enumerate().for_each(|(i, o)| f(i, o));
    }
}

/// Drift `∇_x F(x_i, μ^{N−1}_{x^{−i}}) + σ∇U(x_i)` of every particle. A single
/// particle (`N = 1`) sees its own Dirac mass.
pub fn interacting_drift(inst: &GameInstance, x: &[f64], path: DriftPath, out: &mut [f64]) {
    let d = inst.dim();
    let n = x.len() / d;
    let cost = inst.cost.as_ref();
    match (path, cost.linear_statistics()) {
        (DriftPath::Auto, Some(ls)) => {
            let k = ls.len();
            let mut feat = vec![0.0; n * k];
            for (xi, f) in x.chunks_exact(d).zip(feat.chunks_exact_mut(k)) {
                ls.feature(xi, f);
            }
            let mut total = vec![0.0; k];
            for f in feat.chunks_exact(k) {
                for (t, v) in total.iter_mut().zip(f) {
                    *t += v;
                }
            }
            let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
            for_each_particle(d, out, |i, o| {
                let fi = &feat[i * k..(i + 1) * k];
                let stat: Vec<f64> =
                    if n > 1 { total.iter().zip(fi).map(|(t, f)| (t - f) / denom).collect() } else { total.clone() };
                ls.grad_stat(&x[i * d..(i + 1) * d], &stat, o);
            });
        }
        _ => for_each_particle(d, out, |i, o| {
            let all = AtomView::uniform(d, x);
            let v = if n > 1 { all.without(i) } else { all };
            cost.grad_x(&x[i * d..(i + 1) * d], v, o);
        }),
    }
    add_confinement(inst, x, out);
}

pub(crate) fn add_confinement(inst: &GameInstance, x: &[f64], out: &mut [f64]) {
    let d = inst.dim();
    let s = inst.sigma;
    let mut g = vec![0.0; d];
    for (xi, o) in x.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
        inst.potential.grad(xi, &mut g);
        for (ok, gk) in o.iter_mut().zip(&g) {
            *ok += s * gk;
        }
    }
}

/// `x ← x − drift·dt + √(2σ dt)·ξ`.
pub(crate) fn euler_step(x: &mut [f64], drift: &[f64], noise: Option<&[f64]>, dt: f64, sigma: f64) {
    match noise {
        Some(xi) => {
            let amp = (2.0 * sigma * dt).sqrt();
            for ((v, b), z) in x.iter_mut().zip(drift).zip(xi) {
                *v += -b * dt + amp * z;
            }
        }
        None => {
            for (v, b) in x.iter_mut().zip(drift) {
                *v -= b * dt;
            }
        }
    }
}

pub(crate) fn contraction_warnings(inst: &GameInstance) -> Vec<String> {
    let r = inst.contraction_rate();
    if r <= 0.0 {
        vec![format!("l_F + sigma l_U = {r} <= 0: no contraction guarantee")]
    } else {
        Vec::new()
    }
}

fn noise_streams(cfg: &SdeConfig, replica: usize, n: usize, ids: Option<&[u64]>) -> Result<NoiseStreams> {
    match ids {
        Some(ids) if ids.len() != n => invalid(format!("{} noise ids for {n} particles", ids.len())),
        Some(ids) => Ok(NoiseStreams::with_ids(cfg.seed, replica as u64, ids)),
        None => Ok(NoiseStreams::new(cfg.seed, replica as u64, n)),
    }
}

pub(crate) fn run_single(
    inst: &GameInstance,
    x0: &ParticleState,
    cfg: &SdeConfig,
    steps: usize,
    opts: &SimulationOptions,
    replica: usize,
) -> Result<SimulationResult> {
    let (n, d) = (x0.n(), x0.dim());
    let mut noise = noise_streams(cfg, replica, n, opts.noise_ids.as_deref())?;
    let mut x = x0.positions.clone();
    let mut drift = vec![0.0; n * d];
    let mut xi = vec![0.0; n * d];
    let mut m2 = StatSeries::empty("second_moment");
    let mut mean = StatSeries::empty("mean");
    let mut w2 = StatSeries::empty("w2_reference");
    let mut snapshots = Vec::new();
    let mut record = |x: &[f64], t: f64| -> Result<()> {
        m2.push(t, x.iter().map(|v| v * v).sum::<f64>() / n as f64);
        mean.push(t, x.iter().step_by(d).sum::<f64>() / n as f64);
        if let Some(r) = &opts.reference {
            w2.push(t, wasserstein_1d(&EmpiricalMeasure::new(d, x.to_vec())?.into(), r, 2.0)?);
        }
        if opts.snapshots {
            snapshots.push(ParticleState::new(d, x.to_vec(), t)?);
        }
        Ok(())
    };
    record(&x, x0.time)?;
    for k in 1..=steps {
        interacting_drift(inst, &x, opts.path, &mut drift);
        let noise_ref = if opts.noiseless {
            None
        } else {
            noise.fill(d, &mut xi);
            Some(xi.as_slice())
        };
        euler_step(&mut x, &drift, noise_ref, cfg.dt, inst.sigma);
        let t = x0.time + k as f64 * cfg.dt;
        check_blow_up(&x, d, k, t)?;
        if cfg.records(k, steps) {
            record(&x, t)?;
        }
    }
    let mut series = vec![m2, mean];
    if opts.reference.is_some() {
        series.push(w2);
    }
    Ok(SimulationResult {
        replica,
        final_state: ParticleState::new(d, x, x0.time + steps as f64 * cfg.dt)?,
        series,
        snapshots,
        warnings: contraction_warnings(inst),
    })
}

fn check_shape(inst: &GameInstance, x0: &ParticleState) -> Result<()> {
    if x0.dim() != inst.dim() {
        return Err(Error::DimensionMismatch(format!("{}-d particles for a {}-d game", x0.dim(), inst.dim())));
    }
    Ok(())
}

/// Euler–Maruyama simulation of the `N`-particle system, one result per
/// replica (replica `r` uses noise key `(cfg.seed, r)`).
pub fn simulate_interacting(
    inst: &GameInstance,
    x0: &ParticleState,
    cfg: &SdeConfig,
    opts: &SimulationOptions,
) -> Result<Vec<SimulationResult>> {
    let steps = cfg.validate()?;
    check_shape(inst, x0)?;
    if x0.n() < 2 {
        return invalid("the interacting system needs N >= 2 particles");
    }
    if opts.reference.as_ref().is_some_and(|r| r.dim() != 1 || inst.dim() != 1) {
        return Err(Error::Unsupported("W2 reference series are one-dimensional".into()));
    }
    (0..cfg.replicas).into_par_iter().map(|r| run_single(inst, x0, cfg, steps, opts, r)).collect()
}

#[derive(Clone, Debug)]
pub struct CoupledPairResult {
    /// `mean_i |X^i_t − Y^i_t|²` per replica.
    pub per_replica: Vec<StatSeries>,
    pub mean: StatSeries,
    pub warnings: Vec<String>,
}

fn run_pair(
    inst: &GameInstance,
    x0: &ParticleState,
    y0: &ParticleState,
    cfg: &SdeConfig,
    steps: usize,
    path: DriftPath,
    replica: usize,
) -> Result<StatSeries> {
    let (n, d) = (x0.n(), x0.dim());
    let mut noise = NoiseStreams::new(cfg.seed, replica as u64, n);
    let (mut x, mut y) = (x0.positions.clone(), y0.positions.clone());
    let (mut bx, mut by) = (vec![0.0; n * d], vec![0.0; n * d]);
    let mut xi = vec![0.0; n * d];
    let msd = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64;
    let mut s = StatSeries::empty("coupled_msd");
    s.push(x0.time, msd(&x, &y));
    for k in 1..=steps {
        interacting_drift(inst, &x, path, &mut bx);
        interacting_drift(inst, &y, path, &mut by);
        noise.fill(d, &mut xi);
        euler_step(&mut x, &bx, Some(&xi), cfg.dt, inst.sigma);
        euler_step(&mut y, &by, Some(&xi), cfg.dt, inst.sigma);
        let t = x0.time + k as f64 * cfg.dt;
        check_blow_up(&x, d, k, t)?;
        check_blow_up(&y, d, k, t)?;
        if cfg.records(k, steps) {
            s.push(t, msd(&x, &y));
        }
    }
    Ok(s)
}

/// Two copies of the particle system driven by identical noise (synchronous
/// coupling) from `x0` and `y0`.
pub fn simulate_coupled_pair(
    inst: &GameInstance,
    x0: &ParticleState,
    y0: &ParticleState,
    cfg: &SdeConfig,
    path: DriftPath,
) -> Result<CoupledPairResult> {
    let steps = cfg.validate()?;
    check_shape(inst, x0)?;
    if x0.n() != y0.n() || x0.dim() != y0.dim() {
        return Err(Error::DimensionMismatch("coupled systems must have the same shape".into()));
    }
    if x0.n() < 2 {
        return invalid("the interacting system needs N >= 2 particles");
    }
    let per_replica: Vec<StatSeries> =
        (0..cfg.replicas).into_par_iter().map(|r| run_pair(inst, x0, y0, cfg, steps, path, r)).collect::<Result<_>>()?;
    let mean = StatSeries::average("coupled_msd", &per_replica)?;
    Ok(CoupledPairResult { per_replica, mean, warnings: contraction_warnings(inst) })
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub n: usize,
    pub path: DriftPath,
    pub seconds_per_step: f64,
}

/// Wall-clock cost of one Euler–Maruyama step for each `N`, on the fast path
/// (when the cost has linear statistics) and on the pairwise path.
pub fn bench_drift(inst: &GameInstance, ns: &[usize], steps: usize, seed: u64) -> Result<Vec<BenchRow>> {
    if steps == 0 {
        return invalid("bench needs at least one step");
    }
    let d = inst.dim();
    let mut paths = vec![DriftPath::General];
    if inst.cost.linear_statistics().is_some() {
        paths.insert(0, DriftPath::Auto);
    }
    let mut rows = Vec::new();
    for &n in ns {
        if n == 0 {
            return invalid("bench sizes must be positive");
        }
        for &path in &paths {
            let mut noise = NoiseStreams::new(seed, 0, n);
            let mut x = vec![0.0; n * d];
            noise.fill(d, &mut x);
            let mut b = vec![0.0; n * d];
            let mut xi = vec![0.0; n * d];
            let start = Instant::now();
            for _ in 0..steps {
                interacting_drift(inst, &x, path, &mut b);
                noise.fill(d, &mut xi);
                euler_step(&mut x, &b, Some(&xi), 1e-3, inst.sigma);
            }
            rows.push(BenchRow { n, path, seconds_per_step: start.elapsed().as_secs_f64() / steps as f64 });
        }
    }
    Ok(rows)
}

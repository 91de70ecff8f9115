//! Time stepping: the finite-player gradient flow, interacting Langevin
//! particle systems and their synchronous couplings.

mod engine;
mod export;
mod ode;
mod poc;

pub use engine::{
    bench_drift, interacting_drift, simulate_coupled_pair, simulate_interacting, BenchRow, CoupledPairResult,
    DriftPath, SimulationOptions, SimulationResult,
};
pub use export::{read_series_csv, write_series_csv, write_snapshot_csv};
pub use ode::{cesaro_average, cesaro_window, ode_gradient_flow, Trajectory};
pub use poc::{mean_field_flow_lq, simulate_poc_coupling, MeanFieldReference, PocResult};
pub(crate) use engine::run_single;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::rng::stream;

/// Magnitude beyond which a trajectory is declared to have blown up.
pub const BLOW_UP: f64 = 1e8;

/// `N` particles in `R^d` at time `t`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleState {
    n: usize,
    dim: usize,
    pub positions: Vec<f64>,
    pub time: f64,
}

impl ParticleState {
    pub fn new(dim: usize, positions: Vec<f64>, time: f64) -> Result<Self> {
        if dim == 0 || positions.is_empty() || positions.len() % dim != 0 {
            return invalid(format!("{} coordinates do not form {dim}-d particles", positions.len()));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return invalid("particle positions must be finite");
        }
        if !(time >= 0.0) {
            return invalid("time must be non-negative");
        }
        Ok(Self { n: positions.len() / dim, dim, positions, time })
    }

    pub fn from_1d(points: Vec<f64>) -> Result<Self> {
        Self::new(1, points, 0.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_empirical(&self) -> EmpiricalMeasure {
        EmpiricalMeasure::new(self.dim, self.positions.clone()).expect("valid state")
    }

    /// `mean_i |x_i|²`.
    pub fn second_moment(&self) -> f64 {
        self.positions.iter().map(|v| v * v).sum::<f64>() / self.n as f64
    }

    /// Adds `shift` to every coordinate.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut s = self.clone();
        s.positions.iter_mut().for_each(|v| *v += shift);
        s
    }
}

/// I.i.d. Gaussian initial law with independent coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialLaw {
    pub mean: f64,
    pub std: f64,
}

impl InitialLaw {
    pub fn sample(&self, n: usize, dim: usize, seed: u64, replica: u64) -> Result<ParticleState> {
        if !(self.std >= 0.0 && self.mean.is_finite() && self.std.is_finite()) {
            return invalid("initial law needs finite mean and non-negative std");
        }
        // stream id far from the particle noise ids
        let mut rng = stream(seed, replica, u64::MAX - 1);
        let pts = (0..n * dim).map(|_| self.mean + self.std * rng.sample::<f64, _>(StandardNormal)).collect();
        ParticleState::new(dim, pts, 0.0)
    }
}

/// Time stepping parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdeConfig {
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub record_every: usize,
    pub replicas: usize,
}

impl Default for SdeConfig {
    fn default() -> Self {
        Self { dt: 1e-3, t_end: 1.0, seed: 0, record_every: 10, replicas: 1 }
    }
}

impl SdeConfig {
    pub fn validate(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.t_end > 0.0 && self.dt.is_finite() && self.t_end.is_finite()) {
            return invalid("dt and t_end must be positive");
        }
        if self.dt > self.t_end {
            return invalid(format!("dt = {} exceeds t_end = {}", self.dt, self.t_end));
        }
        if self.record_every == 0 || self.replicas == 0 {
            return invalid("record_every and replicas must be at least 1");
        }
        let steps = (self.t_end / self.dt).round();
        if (steps * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return invalid(format!("t_end = {} is not an integer multiple of dt = {}", self.t_end, self.dt));
        }
        Ok(steps as usize)
    }

    /// Whether step `k` of `steps` is recorded (always the first and last).
    pub(crate) fn records(&self, k: usize, steps: usize) -> bool {
        k % self.record_every == 0 || k == steps
    }
}

/// A recorded statistic over time.
#[derive(Clone, Debug, PartialEq)]
pub struct StatSeries {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl StatSeries {
    pub fn new(label: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch(format!("{} times for {} values", times.len(), values.len())));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("series times must be strictly increasing");
        }
        Ok(Self { label: label.into(), times, values })
    }

    pub(crate) fn empty(label: &str) -> Self {
        Self { label: label.into(), times: Vec::new(), values: Vec::new() }
    }

    pub(crate) fn push(&mut self, t: f64, v: f64) {
        self.times.push(t);
        self.values.push(v);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The sub-series with `lo ≤ t ≤ hi`.
    pub fn window(&self, lo: f64, hi: f64) -> StatSeries {
        let (times, values) =
            self.times.iter().zip(&self.values).filter(|(t, _)| **t >= lo && **t <= hi).map(|(t, v)| (*t, *v)).unzip();
        StatSeries { label: self.label.clone(), times, values }
    }

    /// Pointwise average of series sharing their time grid.
    pub fn average(label: &str, series: &[StatSeries]) -> Result<StatSeries> {
        let Some(first) = series.first() else { return invalid("nothing to average") };
        if series.iter().any(|s| s.times != first.times) {
            return invalid("series to average must share their time grid");
        }
        let k = series.len() as f64;
        let values = (0..first.len()).map(|j| series.iter().map(|s| s.values[j]).sum::<f64>() / k).collect();
        Ok(StatSeries { label: label.into(), times: first.times.clone(), values })
    }
}

pub(crate) fn check_blow_up(x: &[f64], dim: usize, step: usize, time: f64) -> Result<()> {
    for (i, p) in x.chunks_exact(dim).enumerate() {
        let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(r <= BLOW_UP) {
            return Err(Error::BlowUp { step, time, particle: i, magnitude: r });
        }
    }
    Ok(())
}

//! Measure representations: particle clouds, weighted atoms, and 1-D grid
//! densities, together with couplings between finitely supported measures.

mod io;
mod ops;
mod wasserstein;

pub(crate) use io::fmt_f64;
pub use io::{read_empirical_csv, read_grid_csv, write_empirical_csv, write_grid_csv};
pub use ops::{fournier_guillin_delta, moment, relative_entropy, sample, sample_measure};
pub use wasserstein::{quantile_segments, wasserstein_1d, wasserstein_exact, QuantileSegment, EXACT_MAX_ATOMS};

use crate::error::{invalid, Error, Result};

/// Maximum deviation of a total mass from one.
pub const MASS_TOL: f64 = 1e-12;

fn check_points(dim: usize, points: &[f64]) -> Result<()> {
    if dim == 0 {
        return invalid("dimension must be positive");
    }
    if points.is_empty() || points.len() % dim != 0 {
        return invalid(format!(
            "point buffer of length {} does not hold a positive number of {dim}-vectors",
            points.len()
        ));
    }
    if let Some(v) = points.iter().find(|v| !v.is_finite()) {
        return invalid(format!("non-finite coordinate {v}"));
    }
    Ok(())
}

/// Uniform measure on `N` points of `R^d` (points stored row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        check_points(dim, &points)?;
        Ok(Self { dim, points })
    }

    pub fn from_1d(points: Vec<f64>) -> Result<Self> {
        Self::new(1, points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn view(&self) -> AtomView<'_> {
        AtomView::uniform(self.dim, &self.points)
    }

    /// The leave-one-out measure obtained by dropping atom `i`.
    pub fn view_without(&self, i: usize) -> AtomView<'_> {
        AtomView::uniform(self.dim, &self.points).without(i)
    }

    pub fn mean(&self) -> Vec<f64> {
        self.view().mean()
    }

    pub fn to_discrete(&self) -> DiscreteMeasure {
        let n = self.len();
        DiscreteMeasure {
            dim: self.dim,
            points: self.points.clone(),
            weights: vec![1.0 / n as f64; n],
        }
    }
}

/// Finitely supported probability measure with explicit weights.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_points(dim, &points)?;
        if weights.len() * dim != points.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} atoms",
                weights.len(),
                points.len() / dim
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return invalid("weights must be finite and non-negative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return invalid(format!("weights sum to {total}, expected 1"));
        }
        Ok(Self {
            dim,
            points,
            weights,
        })
    }

    /// Normalizes non-negative weights to unit mass.
    pub fn from_unnormalized(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return invalid("weights must have positive finite total");
        }
        Self::new(dim, points, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn dirac(point: &[f64]) -> Result<Self> {
        Self::new(point.len(), point.to_vec(), vec![1.0])
    }

    pub fn uniform(dim: usize, points: Vec<f64>) -> Result<Self> {
        check_points(dim, &points)?;
        let n = points.len() / dim;
        Self::new(dim, points, vec![1.0 / n as f64; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn view(&self) -> AtomView<'_> {
        AtomView::weighted(self.dim, &self.points, &self.weights)
    }
}

/// Borrowed view of a weighted atom list, optionally with one atom removed
/// (the remaining weights are renormalized).
#[derive(Clone, Copy, Debug)]
pub struct AtomView<'a> {
    dim: usize,
    points: &'a [f64],
    weights: Option<&'a [f64]>,
    skip: Option<usize>,
}

impl<'a> AtomView<'a> {
    pub fn uniform(dim: usize, points: &'a [f64]) -> Self {
        Self {
            dim,
            points,
            weights: None,
            skip: None,
        }
    }

    pub fn weighted(dim: usize, points: &'a [f64], weights: &'a [f64]) -> Self {
        debug_assert_eq!(points.len(), weights.len() * dim);
        Self {
            dim,
            points,
            weights: Some(weights),
            skip: None,
        }
    }

    pub fn without(mut self, i: usize) -> Self {
        debug_assert!(self.skip.is_none());
        self.skip = Some(i);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored atoms, including a skipped one.
    pub fn stored_len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn skipped(&self) -> Option<usize> {
        self.skip
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'a [f64], f64)> + '_ {
        let n = self.stored_len();
        let skip = self.skip;
        let weights = self.weights;
        let scale = match (weights, skip) {
            (None, None) => 1.0 / n as f64,
            (None, Some(_)) => 1.0 / (n - 1) as f64,
            (Some(_), None) => 1.0,
            (Some(w), Some(s)) => 1.0 / (1.0 - w[s]),
        };
        let points: &'a [f64] = self.points;
        points
            .chunks_exact(self.dim)
            .enumerate()
            .filter(move |(k, _)| Some(*k) != skip)
            .map(move |(k, p)| (p, weights.map_or(1.0, |w| w[k]) * scale))
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (p, w) in self.iter() {
            for (mk, pk) in m.iter_mut().zip(p) {
                *mk += w * pk;
            }
        }
        m
    }

    /// `∫ |x|^k dm`.
    pub fn abs_moment(&self, k: f64) -> f64 {
        self.iter().map(|(p, w)| w * norm(p).powf(k)).sum()
    }
}

pub(crate) fn norm(p: &[f64]) -> f64 {
    p.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Uniform node layout on `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
}

impl Default for GridSpec {
    /// `[-8, 8]` with 4001 nodes: unit-variance Gaussian tails at the boundary
    /// are below 1e-14.
    fn default() -> Self {
        Self {
            lo: -8.0,
            hi: 8.0,
            nodes: 4001,
        }
    }
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        let g = Self { lo, hi, nodes };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return invalid(format!("grid bounds [{}, {}] are not an interval", self.lo, self.hi));
        }
        if self.nodes < 2 {
            return invalid("a grid needs at least two nodes");
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.nodes - 1) as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j + 1 == self.nodes {
            self.hi
        } else {
            self.lo + j as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.nodes).map(|j| self.node(j)).collect()
    }

    /// Trapezoidal quadrature weights.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.step();
        let mut w = vec![h; self.nodes];
        w[0] = 0.5 * h;
        w[self.nodes - 1] = 0.5 * h;
        w
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.nodes);
        let h = self.step();
        let inner: f64 = values[1..self.nodes - 1].iter().sum();
        h * (inner + 0.5 * (values[0] + values[self.nodes - 1]))
    }
}

/// Probability density sampled at the nodes of a uniform 1-D grid, with unit
/// trapezoidal mass.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMeasure1D {
    grid: GridSpec,
    density: Vec<f64>,
}

/// Allowed deviation of the trapezoidal mass of a grid density from one.
pub const GRID_MASS_TOL: f64 = 1e-10;

impl GridMeasure1D {
    pub fn new(grid: GridSpec, density: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if density.len() != grid.nodes {
            return Err(Error::DimensionMismatch(format!(
                "{} density values for {} nodes",
                density.len(),
                grid.nodes
            )));
        }
        if density.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return invalid("density values must be finite and non-negative");
        }
        let mass = grid.integrate(&density);
        if (mass - 1.0).abs() > GRID_MASS_TOL {
            return invalid(format!("density has mass {mass}, expected 1"));
        }
        Ok(Self { grid, density })
    }

    /// Renormalizes arbitrary non-negative node values to unit mass.
    pub fn from_unnormalized(grid: GridSpec, mut values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.nodes {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.nodes
            )));
        }
        if values.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return invalid("density values must be finite and non-negative");
        }
        let mass = grid.integrate(&values);
        if !(mass > 0.0 && mass.is_finite()) {
            return invalid("density has no mass on the grid");
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Self::new(grid, values)
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_unnormalized(grid, grid.points().into_iter().map(f).collect())
    }

    /// Centered Gaussian discretized on `grid`.
    pub fn gaussian(grid: GridSpec, mean: f64, std: f64) -> Result<Self> {
        Self::from_fn(grid, |x| (-0.5 * ((x - mean) / std).powi(2)).exp())
    }

    pub fn uniform(grid: GridSpec) -> Result<Self> {
        Self::from_unnormalized(grid, vec![1.0; grid.nodes])
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.density)
    }

    /// Node masses `density * trapezoid weight`.
    pub fn node_masses(&self) -> Vec<f64> {
        self.grid
            .trapezoid_weights()
            .iter()
            .zip(&self.density)
            .map(|(w, d)| w * d)
            .collect()
    }

    /// Atoms at the nodes carrying the trapezoidal masses (zero-mass nodes
    /// dropped).
    pub fn to_discrete(&self) -> DiscreteMeasure {
        let nodes = self.grid.points();
        let masses = self.node_masses();
        let total: f64 = masses.iter().sum();
        let (points, weights): (Vec<f64>, Vec<f64>) = nodes
            .into_iter()
            .zip(masses)
            .filter(|(_, m)| *m > 0.0)
            .map(|(x, m)| (x, m / total))
            .unzip();
        DiscreteMeasure {
            dim: 1,
            points,
            weights,
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let vals: Vec<f64> = self
            .grid
            .points()
            .into_iter()
            .zip(&self.density)
            .map(|(x, d)| f(x) * d)
            .collect();
        self.grid.integrate(&vals)
    }

    pub fn mean(&self) -> f64 {
        self.integrate(|x| x)
    }

    /// Largest endpoint density relative to the peak density.
    pub fn boundary_ratio(&self) -> f64 {
        let max = self.density.iter().cloned().fold(0.0, f64::max);
        let edge = self.density[0].max(self.density[self.grid.nodes - 1]);
        if max > 0.0 {
            edge / max
        } else {
            0.0
        }
    }

    /// Fails when the density is not negligible at the grid boundary.
    pub fn check_truncation(&self, tol: f64) -> Result<()> {
        let ratio = self.boundary_ratio();
        if ratio > tol {
            return Err(Error::BoundaryMass { ratio });
        }
        Ok(())
    }

    pub fn sup_distance(&self, other: &GridMeasure1D) -> f64 {
        self.density
            .iter()
            .zip(&other.density)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Any of the supported measure representations.
#[derive(Clone, Debug, PartialEq)]
pub enum Measure {
    Empirical(EmpiricalMeasure),
    Discrete(DiscreteMeasure),
    Grid(GridMeasure1D),
}

impl Measure {
    pub fn dim(&self) -> usize {
        match self {
            Measure::Empirical(m) => m.dim(),
            Measure::Discrete(m) => m.dim(),
            Measure::Grid(_) => 1,
        }
    }

    /// Weighted atoms of the measure (grid nodes with trapezoidal masses).
    pub fn to_discrete(&self) -> DiscreteMeasure {
        match self {
            Measure::Empirical(m) => m.to_discrete(),
            Measure::Discrete(m) => m.clone(),
            Measure::Grid(m) => m.to_discrete(),
        }
    }
}

impl From<EmpiricalMeasure> for Measure {
    fn from(m: EmpiricalMeasure) -> Self {
        Measure::Empirical(m)
    }
}

impl From<DiscreteMeasure> for Measure {
    fn from(m: DiscreteMeasure) -> Self {
        Measure::Discrete(m)
    }
}

impl From<GridMeasure1D> for Measure {
    fn from(m: GridMeasure1D) -> Self {
        Measure::Grid(m)
    }
}

/// Transport plan between two finitely supported measures; `mass` is
/// row-major with one row per atom of `first`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    first: DiscreteMeasure,
    second: DiscreteMeasure,
    mass: Vec<f64>,
}

impl Coupling {
    /// Builds a coupling and checks its marginals.
    pub fn new(first: DiscreteMeasure, second: DiscreteMeasure, mass: Vec<f64>) -> Result<Self> {
        let c = Self::new_unchecked(first, second, mass)?;
        c.check_marginals()?;
        Ok(c)
    }

    /// Builds a coupling checking only shapes; marginals are verified by
    /// consumers such as `gamma_dm`.
    pub fn new_unchecked(
        first: DiscreteMeasure,
        second: DiscreteMeasure,
        mass: Vec<f64>,
    ) -> Result<Self> {
        if first.dim() != second.dim() {
            return Err(Error::DimensionMismatch(format!(
                "coupling of {}-d and {}-d measures",
                first.dim(),
                second.dim()
            )));
        }
        if mass.len() != first.len() * second.len() {
            return Err(Error::DimensionMismatch(format!(
                "mass matrix of length {} for {}x{} supports",
                mass.len(),
                first.len(),
                second.len()
            )));
        }
        Ok(Self {
            first,
            second,
            mass,
        })
    }

    pub fn check_marginals(&self) -> Result<()> {
        if self.mass.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return invalid("coupling masses must be finite and non-negative");
        }
        let cols = self.second.len();
        for (i, row) in self.mass.chunks_exact(cols).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - self.first.weights()[i]).abs() > MASS_TOL {
                return invalid(format!("row {i} sums to {s}, first marginal has {}", self.first.weights()[i]));
            }
        }
        for j in 0..cols {
            let s: f64 = self.mass.iter().skip(j).step_by(cols).sum();
            if (s - self.second.weights()[j]).abs() > MASS_TOL {
                return invalid(format!("column {j} sums to {s}, second marginal has {}", self.second.weights()[j]));
            }
        }
        Ok(())
    }

    pub fn product(first: &DiscreteMeasure, second: &DiscreteMeasure) -> Result<Self> {
        let mass = first
            .weights()
            .iter()
            .flat_map(|a| second.weights().iter().map(move |b| a * b))
            .collect();
        Self::new(first.clone(), second.clone(), mass)
    }

    /// `m` coupled with itself along the diagonal.
    pub fn diagonal(m: &DiscreteMeasure) -> Self {
        let n = m.len();
        let mut mass = vec![0.0; n * n];
        for (i, w) in m.weights().iter().enumerate() {
            mass[i * n + i] = *w;
        }
        Self {
            first: m.clone(),
            second: m.clone(),
            mass,
        }
    }

    /// Equal-size uniform measures matched by `perm`: atom `i` of `first`
    /// goes to atom `perm[i]` of `second`.
    pub fn from_permutation(first: &EmpiricalMeasure, second: &EmpiricalMeasure, perm: &[usize]) -> Result<Self> {
        let n = first.len();
        if second.len() != n || perm.len() != n {
            return invalid("permutation coupling needs equal sizes");
        }
        let mut seen = vec![false; n];
        let mut mass = vec![0.0; n * n];
        for (i, &j) in perm.iter().enumerate() {
            if j >= n || seen[j] {
                return invalid("not a permutation");
            }
            seen[j] = true;
            mass[i * n + j] = 1.0 / n as f64;
        }
        Self::new(first.to_discrete(), second.to_discrete(), mass)
    }

    /// Quantile coupling along the first coordinate: comonotone, or
    /// antimonotone when `anti` is set.
    pub fn monotone(first: &DiscreteMeasure, second: &DiscreteMeasure, anti: bool) -> Result<Self> {
        let order = |m: &DiscreteMeasure, desc: bool| {
            let mut idx: Vec<usize> = (0..m.len()).collect();
            idx.sort_by(|&a, &b| {
                let o = m.point(a)[0].total_cmp(&m.point(b)[0]);
                if desc {
                    o.reverse()
                } else {
                    o
                }
            });
            idx
        };
        let ia = order(first, false);
        let ib = order(second, anti);
        let cols = second.len();
        let mut mass = vec![0.0; first.len() * cols];
        let (mut a, mut b) = (0, 0);
        let mut ra = first.weights()[ia[0]];
        let mut rb = second.weights()[ib[0]];
        // north-west corner rule on the sorted supports
        loop {
            let t = ra.min(rb);
            mass[ia[a] * cols + ib[b]] += t;
            ra -= t;
            rb -= t;
            let a_done = ra <= 1e-15 && a + 1 < first.len();
            let b_done = rb <= 1e-15 && b + 1 < second.len();
            if a_done {
                a += 1;
                ra += first.weights()[ia[a]];
            }
            if b_done {
                b += 1;
                rb += second.weights()[ib[b]];
            }
            if !a_done && !b_done {
                break;
            }
        }
        let c = Self::new_unchecked(first.clone(), second.clone(), mass)?;
        c.check_marginals()?;
        Ok(c)
    }

    pub fn first(&self) -> &DiscreteMeasure {
        &self.first
    }

    pub fn second(&self) -> &DiscreteMeasure {
        &self.second
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// `∫ |x - x'|^2 π(dx, dx')`.
    pub fn transport_cost2(&self) -> f64 {
        let cols = self.second.len();
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > 0.0)
            .map(|(k, m)| m * dist2(self.first.point(k / cols), self.second.point(k % cols)))
            .sum()
    }
}

//! Invariant measures of the McKean–Vlasov dynamics, the vanishing-temperature
//! sweep toward a mean field equilibrium, and ε-Nash certification.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::game::{eval_many, FinitePlayerGame, GameInstance, MeanFieldCost};
use crate::measures::{
    relative_entropy, sample_measure, wasserstein_1d, AtomView, EmpiricalMeasure, GridMeasure1D, GridSpec, Measure,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointOptions {
    /// Stop when `sup |G(m) − m| ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// `λ` in `m ← (1 − λ)m + λG(m)`.
    pub damping: f64,
    /// Maximum endpoint-to-peak density ratio accepted at convergence.
    pub boundary_tol: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 5000, damping: 0.5, boundary_tol: 1e-8 }
    }
}

impl FixedPointOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return invalid("fixed point needs tol > 0 and max_iter >= 1");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return invalid(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct InvariantMeasureResult {
    pub measure: GridMeasure1D,
    /// `log Z^σ` of the Gibbs map at the returned measure.
    pub log_normalizer: f64,
    pub iterations: usize,
    /// `sup |G(m) − m|` at the returned measure.
    pub residual: f64,
    pub sigma: f64,
}

fn require_1d(instance: &GameInstance) -> Result<()> {
    if instance.dim() != 1 {
        return Err(Error::Unsupported(format!("grid solvers are one-dimensional, game is {}-d", instance.dim())));
    }
    Ok(())
}

/// `G(m) ∝ exp(−F(·, m)/σ − U)` on the grid of `m`, with `log Z`.
pub fn gibbs_map(instance: &GameInstance, m: &GridMeasure1D) -> Result<(GridMeasure1D, f64)> {
    require_1d(instance)?;
    let grid = *m.grid();
    let xs = grid.points();
    let atoms = m.to_discrete();
    let f = eval_many(instance.cost.as_ref(), &xs, atoms.view());
    let a: Vec<f64> = xs.iter().zip(&f).map(|(x, fx)| -fx / instance.sigma - instance.potential.eval(&[*x])).collect();
    let top = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return invalid("Gibbs exponent is not finite on the grid");
    }
    let w: Vec<f64> = a.iter().map(|v| (v - top).exp()).collect();
    let z = grid.integrate(&w);
    Ok((GridMeasure1D::from_unnormalized(grid, w)?, top + z.ln()))
}

/// `ν = e^{−U}` restricted to the grid and renormalized.
pub fn reference_measure(instance: &GameInstance, grid: GridSpec) -> Result<GridMeasure1D> {
    require_1d(instance)?;
    let a: Vec<f64> = grid.points().iter().map(|x| -instance.potential.eval(&[*x])).collect();
    let top = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    GridMeasure1D::from_unnormalized(grid, a.iter().map(|v| (v - top).exp()).collect())
}

/// Damped fixed-point iteration of the Gibbs map. Without `init`, starts from
/// `G(ν)` (one undamped step from the reference measure), so a
/// measure-independent cost converges on the first check.
pub fn invariant_fixed_point(
    instance: &GameInstance,
    grid: GridSpec,
    opts: &FixedPointOptions,
    init: Option<&GridMeasure1D>,
) -> Result<InvariantMeasureResult> {
    require_1d(instance)?;
    opts.validate()?;
    let mut m = match init {
        Some(m0) => {
            if *m0.grid() != grid {
                return invalid("initial density lives on a different grid");
            }
            m0.clone()
        }
        None => gibbs_map(instance, &reference_measure(instance, grid)?)?.0,
    };
    let mut residual = f64::INFINITY;
    for k in 1..=opts.max_iter {
        let (g, log_z) = gibbs_map(instance, &m)?;
        residual = g.sup_distance(&m);
        if residual <= opts.tol {
            m.check_truncation(opts.boundary_tol)?;
            return Ok(InvariantMeasureResult {
                measure: m,
                log_normalizer: log_z,
                iterations: k,
                residual,
                sigma: instance.sigma,
            });
        }
        let lam = opts.damping;
        let mixed = m.density().iter().zip(g.density()).map(|(a, b)| (1.0 - lam) * a + lam * b).collect();
        m = GridMeasure1D::from_unnormalized(grid, mixed)?;
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, residual })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MfeSource {
    SigmaSweep,
    Analytic,
}

impl MfeSource {
    pub fn name(self) -> &'static str {
        match self {
            MfeSource::SigmaSweep => "sigma-sweep",
            MfeSource::Analytic => "analytic",
        }
    }
}

#[derive(Clone, Debug)]
pub struct MfeResult {
    pub measure: Measure,
    pub gap: f64,
    pub source: MfeSource,
}

#[derive(Clone, Debug)]
pub struct SigmaSweepResult {
    /// Temperatures that converged, in sweep order.
    pub sigmas: Vec<f64>,
    pub measures: Vec<InvariantMeasureResult>,
    /// `W₂(m^{σ_k}, m^{σ_{k+1}})`.
    pub w2_consecutive: Vec<f64>,
    /// `W₂(m^{σ_k}, m^{σ_min})`.
    pub w2_to_smallest: Vec<f64>,
    /// Temperatures whose fixed point failed, with the error message.
    pub failures: Vec<(f64, String)>,
    /// The smallest-σ measure as MFE candidate.
    pub mfe: MfeResult,
}

/// Solves the fixed point along a strictly decreasing σ list, warm-starting
/// each temperature from the previous solution.
pub fn mfe_sigma_sweep(
    instance: &GameInstance,
    sigmas: &[f64],
    grid: GridSpec,
    opts: &FixedPointOptions,
    search_grid: &GridSpec,
) -> Result<SigmaSweepResult> {
    require_1d(instance)?;
    if sigmas.is_empty() {
        return invalid("empty sigma list");
    }
    if sigmas.iter().any(|s| !(*s > 0.0)) || sigmas.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("sigma list must be positive and strictly decreasing");
    }
    let mut measures: Vec<InvariantMeasureResult> = Vec::new();
    let mut failures = Vec::new();
    let mut first_err = None;
    for &s in sigmas {
        let inst = instance.with_sigma(s)?;
        let init = measures.last().map(|r| &r.measure);
        match invariant_fixed_point(&inst, grid, opts, init) {
            Ok(r) => measures.push(r),
            Err(e) if e.is_numeric() => {
                failures.push((s, e.to_string()));
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    let Some(last) = measures.last() else {
        return Err(first_err.expect("a failure for every temperature"));
    };
    let m0: Measure = last.measure.clone().into();
    let w2_to_smallest =
        measures.iter().map(|r| wasserstein_1d(&r.measure.clone().into(), &m0, 2.0)).collect::<Result<Vec<_>>>()?;
    let w2_consecutive = measures
        .windows(2)
        .map(|w| wasserstein_1d(&w[0].measure.clone().into(), &w[1].measure.clone().into(), 2.0))
        .collect::<Result<Vec<_>>>()?;
    let gap = mfe_residual(instance.cost.as_ref(), &m0, search_grid)?;
    Ok(SigmaSweepResult {
        sigmas: measures.iter().map(|r| r.sigma).collect(),
        measures,
        w2_consecutive,
        w2_to_smallest,
        failures,
        mfe: MfeResult { measure: m0, gap, source: MfeSource::SigmaSweep },
    })
}

/// The analytic MFE of a cost, with its residual.
pub fn analytic_mfe(cost: &dyn MeanFieldCost, search_grid: &GridSpec) -> Result<Option<MfeResult>> {
    let Some(m) = cost.analytic_mfe() else { return Ok(None) };
    let m: Measure = m.into();
    let gap = if cost.dim() == 1 { mfe_residual(cost, &m, search_grid)? } else { 0.0 };
    Ok(Some(MfeResult { measure: m, gap, source: MfeSource::Analytic }))
}

/// Node-mass fraction defining the support of a grid density.
pub const SUPPORT_MASS_THRESHOLD: f64 = 1e-6;

/// `sup_{supp m} F(·, m) − min F(·, m)`, the minimum taken over the search
/// grid and the support itself.
pub fn mfe_residual(cost: &dyn MeanFieldCost, m: &Measure, search_grid: &GridSpec) -> Result<f64> {
    if cost.dim() != 1 || m.dim() != 1 {
        return Err(Error::Unsupported("mfe_residual searches a 1-D grid".into()));
    }
    search_grid.validate()?;
    let atoms = m.to_discrete();
    let support: Vec<f64> = match m {
        Measure::Grid(g) => {
            let masses = g.node_masses();
            let total: f64 = masses.iter().sum();
            g.grid().points().into_iter().zip(masses).filter(|(_, w)| *w > SUPPORT_MASS_THRESHOLD * total).map(|(x, _)| x).collect()
        }
        _ => atoms.points().to_vec(),
    };
    let on_support = eval_many(cost, &support, atoms.view());
    let on_grid = eval_many(cost, &search_grid.points(), atoms.view());
    let sup = on_support.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let inf = on_grid.iter().chain(&on_support).cloned().fold(f64::INFINITY, f64::min);
    Ok((sup - inf).max(0.0))
}

/// `Φ(μ, m) = ∫F(x, m)μ(dx) + σH(μ|ν)` with `ν = e^{−U}` renormalized on the grid.
pub fn free_energy(instance: &GameInstance, mu: &GridMeasure1D, m: &GridMeasure1D) -> Result<f64> {
    require_1d(instance)?;
    if mu.grid() != m.grid() {
        return invalid("free energy needs mu and m on the same grid");
    }
    let nu = reference_measure(instance, *mu.grid())?;
    let xs = mu.grid().points();
    let atoms = m.to_discrete();
    let f = eval_many(instance.cost.as_ref(), &xs, atoms.view());
    let vals: Vec<f64> = f.iter().zip(mu.density()).map(|(a, b)| a * b).collect();
    Ok(mu.grid().integrate(&vals) + instance.sigma * relative_entropy(mu, &nu)?)
}

/// Result of [`epsilon_nash_from_mfe`].
#[derive(Clone, Debug)]
pub struct EpsilonNash {
    pub n: usize,
    /// `max_i max_y [F(X^i, μ^{−i}) − F(y, μ^{−i})]⁺`.
    pub epsilon: f64,
    /// `max_i [sup_x (F(x, μ^{−i}) − F(x, m⁰)) + sup_y (F(y, m⁰) − F(y, μ^{−i}))]`.
    pub sup_bound: f64,
    /// `max_i [F(X^i, m⁰) − min_y F(y, m⁰)]⁺`; zero when `m⁰` is an exact MFE.
    pub mfe_slack: f64,
    pub per_player: Vec<f64>,
    pub profile: EmpiricalMeasure,
}

impl EpsilonNash {
    /// The chain `ε_i ≤ A_i + B_i + C_i` holds player by player; this is the
    /// aggregate check.
    pub fn bound_holds(&self) -> bool {
        self.epsilon <= self.sup_bound + self.mfe_slack + 1e-12 * (1.0 + self.sup_bound.abs())
    }
}

/// Samples `N` i.i.d. players from `m⁰` and measures how far the profile is
/// from a Nash equilibrium of the symmetrized game.
pub fn epsilon_nash_from_mfe(
    m0: &Measure,
    cost: &dyn MeanFieldCost,
    n: usize,
    seed: u64,
    search_grid: &GridSpec,
) -> Result<EpsilonNash> {
    if n < 2 {
        return invalid("epsilon-Nash needs N >= 2");
    }
    if cost.dim() != 1 || m0.dim() != 1 {
        return Err(Error::Unsupported("epsilon-Nash search is one-dimensional".into()));
    }
    search_grid.validate()?;
    let profile = sample_measure(m0, n, seed)?;
    let ys = search_grid.points();
    let m0_atoms = m0.to_discrete();
    let f0_grid = eval_many(cost, &ys, m0_atoms.view());
    let f0_min = f0_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let xs = profile.points();
    let f0_players = eval_many(cost, xs, m0_atoms.view());

    let rows: Vec<(f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let v: AtomView<'_> = profile.view_without(i);
            let fg = eval_many(cost, &ys, v);
            let fi = cost.eval(&[xs[i]], v);
            let min_y = fg.iter().cloned().fold(f64::INFINITY, f64::min);
            let eps = (fi - min_y).max(0.0);
            // A_i over grid ∪ {X^i}, B_i over the grid
            let mut a = fi - f0_players[i];
            let mut b = f64::NEG_INFINITY;
            for (g, g0) in fg.iter().zip(&f0_grid) {
                a = a.max(g - g0);
                b = b.max(g0 - g);
            }
            let c = (f0_players[i] - f0_min).max(0.0);
            (eps, a + b, c)
        })
        .collect();
    Ok(EpsilonNash {
        n,
        epsilon: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        sup_bound: rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max),
        mfe_slack: rows.iter().map(|r| r.2).fold(0.0, f64::max),
        per_player: rows.iter().map(|r| r.0).collect(),
        profile,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestResponseGap {
    pub per_player: Vec<f64>,
    pub max: f64,
}

/// `ε_i = F_i(x) − min(F_i(x), min_y F_i(x^{−i}, y))` over a 1-D search grid.
pub fn best_response_gap(game: &FinitePlayerGame, x: &[f64], search_grid: &GridSpec) -> Result<BestResponseGap> {
    if game.dim() != 1 {
        return Err(Error::Unsupported("best-response search is one-dimensional".into()));
    }
    if x.len() != game.n_players() {
        return Err(Error::DimensionMismatch(format!("profile of length {} for {} players", x.len(), game.n_players())));
    }
    search_grid.validate()?;
    let ys = search_grid.points();
    let per_player: Vec<f64> = (0..game.n_players())
        .into_par_iter()
        .map(|i| {
            let fi = game.cost(i, x);
            let best = ys.iter().map(|y| game.cost_with_deviation(i, x, &[*y])).fold(fi, f64::min);
            fi - best
        })
        .collect();
    let max = per_player.iter().cloned().fold(0.0, f64::max);
    Ok(BestResponseGap { per_player, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{GaussianPotential, Lq};
    use std::sync::Arc;

    fn quad(sigma: f64) -> GameInstance {
        GameInstance::new(Arc::new(Lq::quadratic(1)), Arc::new(GaussianPotential::new(1)), sigma).unwrap()
    }

    #[test]
    fn measure_independent_converges_first_check() {
        let r = invariant_fixed_point(&quad(0.25), GridSpec::default(), &FixedPointOptions::default(), None).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.residual <= 1e-10);
    }

    #[test]
    fn damped_iteration_from_uniform() {
        let g = GridSpec::default();
        let u = GridMeasure1D::uniform(g).unwrap();
        let r = invariant_fixed_point(&quad(0.25), g, &FixedPointOptions::default(), Some(&u)).unwrap();
        assert!(r.iterations <= 50, "{}", r.iterations);
        let exact = GridMeasure1D::gaussian(g, 0.0, 0.2f64.sqrt()).unwrap();
        let diff: Vec<f64> = r.measure.density().iter().zip(exact.density()).map(|(a, b)| (a - b).abs()).collect();
        assert!(g.integrate(&diff) < 1e-6);
    }

    #[test]
    fn residual_of_diracs() {
        let c = Lq::quadratic(1);
        let g = GridSpec::new(-4.0, 4.0, 8001).unwrap();
        let gap = mfe_residual(&c, &crate::measures::DiscreteMeasure::dirac(&[1.5]).unwrap().into(), &g).unwrap();
        assert!((gap - 1.125).abs() < 1e-12);
        let gap = mfe_residual(&c, &crate::measures::DiscreteMeasure::dirac(&[0.0]).unwrap().into(), &g).unwrap();
        assert_eq!(gap, 0.0);
    }

    #[test]
    fn best_response_of_measure_independent_players() {
        let game = crate::game::symmetrize(Arc::new(Lq::quadratic(1)), 3).unwrap();
        let g = GridSpec::new(-4.0, 4.0, 8001).unwrap();
        let x = [1.0, -0.5, 2.0];
        let r = best_response_gap(&game, &x, &g).unwrap();
        for (e, xi) in r.per_player.iter().zip(x) {
            assert!((e - xi * xi / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sweep_rejects_bad_lists() {
        let g = GridSpec::default();
        let o = FixedPointOptions::default();
        assert!(mfe_sigma_sweep(&quad(0.1), &[0.1, 0.2], g, &o, &g).is_err());
        assert!(mfe_sigma_sweep(&quad(0.1), &[], g, &o, &g).is_err());
    }
}

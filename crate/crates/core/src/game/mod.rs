//! Games: mean-field costs `F(x, m)`, confining potentials `U`, their
//! finite-player symmetrizations, and numerical probes of the structural
//! assumptions (monotonicity, dissipativity, gradient consistency).

mod builtin;
mod catalog;
mod probe;

pub use builtin::{
    sincos2p, AntiConvolution, Convolution, GaussianPotential, Kernel, Lq, QuarticPotential, RankOne, SinCos,
    SoftAbsPotential, WeakDm, Well,
};
pub use catalog::{build_cost, build_potential, builtin_games, builtin_potentials, CatalogEntry, GameSpec};
pub use probe::{
    check_cost_gradient, check_dissipativity, check_player_gradients, check_potential_gradient, gamma_dm, gamma_ll,
    probe_monotonicity, CouplingFamily, DissipativityCheck, MonotonicityReport, ProbeOptions, Witness,
};

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::measures::{AtomView, DiscreteMeasure};

/// Constants in `2x·∇_x F(x,m) ≥ α|x|² + C₁ + C₂(|x|² − |m|₂²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dissipativity {
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Declared structural constants of a mean-field cost.
#[derive(Clone, Debug, PartialEq)]
pub struct CostConstants {
    /// `ℓ_F`: `F` is `ℓ_F`-displacement semimonotone.
    pub dm_constant: f64,
    /// Convexity modulus of `F(·, m)`, uniform in `m`.
    pub convexity_constant: Option<f64>,
    /// Lipschitz constant of `∇_x F` jointly in `(x, W_1)`.
    pub lipschitz_bound: f64,
    /// `(C_F, p)` with `sup_x |F(x,m) − F(x,m')| ≤ C_F W_p(m, m')`.
    pub wasserstein_lipschitz: Option<(f64, f64)>,
    pub dissipativity: Option<Dissipativity>,
    /// `c_F` of the weak displacement monotonicity
    /// `Γ_DM ≥ c_F ∫|x−x'|²dπ / (1 + |m|₁ + |m'|₁)`.
    pub weak_dm_constant: Option<f64>,
    /// Declared Lasry–Lions monotone.
    pub lasry_lions: bool,
}

/// Costs whose measure dependence goes only through averages of a feature
/// map, `F(x, m) = f(x, ∫φ dm)`. Leave-one-out statistics then cost O(1)
/// per particle.
pub trait LinearStatistics: Send + Sync {
    fn len(&self) -> usize;
    fn feature(&self, y: &[f64], out: &mut [f64]);
    fn eval_stat(&self, x: &[f64], stat: &[f64]) -> f64;
    fn grad_stat(&self, x: &[f64], stat: &[f64], out: &mut [f64]);

    fn average(&self, m: AtomView<'_>) -> Vec<f64> {
        let k = self.len();
        let mut s = vec![0.0; k];
        let mut f = vec![0.0; k];
        for (y, w) in m.iter() {
            self.feature(y, &mut f);
            for (sk, fk) in s.iter_mut().zip(&f) {
                *sk += w * fk;
            }
        }
        s
    }
}

/// A mean-field cost `F: R^d × P_2(R^d) → R`.
pub trait MeanFieldCost: Send + Sync + fmt::Debug {
    /// Name with parameters, e.g. `lq(a=1,b=0.5)`.
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], m: AtomView<'_>) -> f64;
    fn grad_x(&self, x: &[f64], m: AtomView<'_>, out: &mut [f64]);

    /// Flat derivative `δ_m F(x, m, y)`, normalized so `∫ δ_m F(x,m,y) m(dy) = 0`.
    fn flat_deriv(&self, _x: &[f64], _m: AtomView<'_>, _y: &[f64]) -> Option<f64> {
        None
    }

    /// Lions derivative `D_m F(x, m, y) = ∇_y δ_m F(x, m, y)`; returns false
    /// when not provided.
    fn lions_deriv(&self, _x: &[f64], _m: AtomView<'_>, _y: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    fn constants(&self) -> &CostConstants;

    fn linear_statistics(&self) -> Option<&dyn LinearStatistics> {
        None
    }

    /// `(a, b)` when the cost is the linear-quadratic `a|x|²/2 + b x·mean(m)`.
    fn lq_coefficients(&self) -> Option<(f64, f64)> {
        None
    }

    /// A known mean field equilibrium, when one is available in closed form.
    fn analytic_mfe(&self) -> Option<DiscreteMeasure> {
        None
    }
}

/// Evaluates `F(x_j, m)` at many 1-D or d-D points (row-major `xs`).
pub fn eval_many(cost: &dyn MeanFieldCost, xs: &[f64], m: AtomView<'_>) -> Vec<f64> {
    let d = cost.dim();
    match cost.linear_statistics() {
        Some(ls) => {
            let s = ls.average(m);
            xs.chunks_exact(d).map(|x| ls.eval_stat(x, &s)).collect()
        }
        None => xs.chunks_exact(d).map(|x| cost.eval(x, m)).collect(),
    }
}

/// A confining potential `U` normalized so that `e^{-U}` is a probability
/// density.
pub trait Potential: Send + Sync + fmt::Debug {
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64], out: &mut [f64]);
    /// `ℓ_U`.
    fn convexity_constant(&self) -> f64;
    /// `(C₁ᵁ, C₂ᵁ)` in `2x·∇U(x) ≥ C₁ᵁ|x|² + C₂ᵁ`.
    fn dissipativity(&self) -> (f64, f64);
    /// The constant added to the raw potential to normalize `e^{-U}`.
    fn log_normalizer(&self) -> f64;
    /// `k` when `∇U(x) = k x`.
    fn quadratic_stiffness(&self) -> Option<f64> {
        None
    }
}

/// A cost, a potential and a temperature.
#[derive(Clone, Debug)]
pub struct GameInstance {
    pub cost: Arc<dyn MeanFieldCost>,
    pub potential: Arc<dyn Potential>,
    pub sigma: f64,
}

impl GameInstance {
    pub fn new(cost: Arc<dyn MeanFieldCost>, potential: Arc<dyn Potential>, sigma: f64) -> Result<Self> {
        if cost.dim() != potential.dim() {
            return Err(Error::DimensionMismatch(format!(
                "cost is {}-d, potential is {}-d",
                cost.dim(),
                potential.dim()
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return invalid(format!("temperature sigma = {sigma} must be positive"));
        }
        Ok(Self { cost, potential, sigma })
    }

    pub fn dim(&self) -> usize {
        self.cost.dim()
    }

    /// `ℓ_F + σ ℓ_U`, the contraction rate of the synchronous coupling.
    pub fn contraction_rate(&self) -> f64 {
        self.cost.constants().dm_constant + self.sigma * self.potential.convexity_constant()
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.cost.clone(), self.potential.clone(), sigma)
    }
}

type PlayerCost = dyn Fn(usize, &[f64]) -> f64 + Send + Sync;
type PlayerGrad = dyn Fn(usize, &[f64], &mut [f64]) + Send + Sync;

/// An `N`-player game with costs `F_i: (R^d)^N → R` and own-action gradients
/// `∇_{x_i} F_i`. Profiles are row-major `N × d` buffers.
#[derive(Clone)]
pub struct FinitePlayerGame {
    label: String,
    n_players: usize,
    dim: usize,
    cost: Arc<PlayerCost>,
    grad: Arc<PlayerGrad>,
    lipschitz_bound: f64,
}

impl fmt::Debug for FinitePlayerGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FinitePlayerGame")
            .field("label", &self.label)
            .field("n_players", &self.n_players)
            .field("dim", &self.dim)
            .finish()
    }
}

impl FinitePlayerGame {
    pub fn new(
        label: impl Into<String>,
        n_players: usize,
        dim: usize,
        lipschitz_bound: f64,
        cost: impl Fn(usize, &[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(usize, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self> {
        if n_players < 1 || dim < 1 {
            return invalid("a game needs at least one player and one dimension");
        }
        Ok(Self {
            label: label.into(),
            n_players,
            dim,
            cost: Arc::new(cost),
            grad: Arc::new(grad),
            lipschitz_bound,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn cost(&self, i: usize, profile: &[f64]) -> f64 {
        (self.cost)(i, profile)
    }

    pub fn grad(&self, i: usize, profile: &[f64], out: &mut [f64]) {
        (self.grad)(i, profile, out)
    }

    /// `F_i(x^{-i}, y)`.
    pub fn cost_with_deviation(&self, i: usize, profile: &[f64], y: &[f64]) -> f64 {
        let mut p = profile.to_vec();
        p[i * self.dim..(i + 1) * self.dim].copy_from_slice(y);
        self.cost(i, &p)
    }
}

/// The symmetric `N`-player game `F_i(x) = F(x_i, μ^{N−1}_{x^{−i}})` built
/// on the leave-one-out empirical measure.
pub fn symmetrize(cost: Arc<dyn MeanFieldCost>, n: usize) -> Result<FinitePlayerGame> {
    if n < 2 {
        return invalid(format!("symmetrization needs N >= 2 players, got {n}"));
    }
    let d = cost.dim();
    let lip = cost.constants().lipschitz_bound;
    let c1 = cost.clone();
    let c2 = cost.clone();
    FinitePlayerGame::new(
        format!("sym[{}; N={n}]", cost.id()),
        n,
        d,
        lip,
        move |i, x| {
            let v = AtomView::uniform(d, x).without(i);
            c1.eval(&x[i * d..(i + 1) * d], v)
        },
        move |i, x, out| {
            let v = AtomView::uniform(d, x).without(i);
            c2.grad_x(&x[i * d..(i + 1) * d], v, out)
        },
    )
}

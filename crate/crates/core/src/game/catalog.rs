use std::collections::BTreeMap;
use std::sync::Arc;

use super::builtin::*;
use super::{symmetrize, CostConstants, Dissipativity, FinitePlayerGame, GameInstance, LinearStatistics, MeanFieldCost, Potential};
use crate::error::{Error, Result};
use crate::measures::{AtomView, DiscreteMeasure};

/// A named built-in with its parameters and defaults.
#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static [(&'static str, &'static str)],
    pub default_potential: &'static str,
    /// True for games given directly as `N`-player costs.
    pub finite_player: bool,
}

const DECLARE_KEYS: &[&str] =
    &["declare.dm_constant", "declare.lipschitz", "declare.alpha", "declare.c1", "declare.c2", "declare.lasry_lions"];

pub fn builtin_games() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "lq",
            summary: "F = a|x|^2/2 + b x.mean(m)",
            params: &[("a", "1"), ("b", "0.5"), ("d", "1")],
            default_potential: "gaussian",
            finite_player: false,
        },
        CatalogEntry {
            name: "quad",
            summary: "F = |x|^2/2 (no interaction)",
            params: &[("d", "1")],
            default_potential: "gaussian",
            finite_player: false,
        },
        CatalogEntry {
            name: "convolution",
            summary: "F = amp int phi(x-y) m(dy) + g(x), phi in {sin, tanh}, g quadratic or flat well",
            params: &[("phi", "sin"), ("amp", "1"), ("c", "1"), ("well", "quadratic"), ("half_width", "3.141592653589793")],
            default_potential: "gaussian",
            finite_player: false,
        },
        CatalogEntry {
            name: "rank_one",
            summary: "F = tanh(x) int tanh dm + x^2/2",
            params: &[],
            default_potential: "gaussian",
            finite_player: false,
        },
        CatalogEntry {
            name: "anti_convolution",
            summary: "F = C x^2 - beta int exp(-(x-y)^2) m(dy); displacement but not Lasry-Lions monotone",
            params: &[("C", "1"), ("beta", "0.5")],
            default_potential: "gaussian",
            finite_player: false,
        },
        CatalogEntry {
            name: "weak_dm",
            summary: "F = kappa (x - mean)^2/2 + psi(mean) x, psi = sign log(1+|.|); weakly displacement monotone",
            params: &[("kappa", "0.5")],
            default_potential: "soft_abs",
            finite_player: false,
        },
        CatalogEntry {
            name: "sincos",
            summary: "F = x^2 + sin(x) int cos dm",
            params: &[],
            default_potential: "gaussian",
            finite_player: false,
        },
        CatalogEntry {
            name: "sincos2p",
            summary: "two players: F1 = x^2 + sin(x)cos(y), F2 = y^2 + sin(y)cos(x)",
            params: &[],
            default_potential: "gaussian",
            finite_player: true,
        },
    ]
}

pub fn builtin_potentials() -> &'static [(&'static str, &'static str)] {
    &[
        ("gaussian", "U = |x|^2/2 + (d/2)log 2pi, l_U = 1"),
        ("soft_abs", "U = sqrt(1+x^2) + log Z, convex with l_U = 0"),
        ("double_well", "U = x^4/4 - x^2/2 + log Z, l_U = -1"),
    ]
}

pub fn build_potential(name: &str, dim: usize) -> Result<Arc<dyn Potential>> {
    let one_d = |p: Arc<dyn Potential>| {
        if dim == 1 {
            Ok(p)
        } else {
            Err(Error::Config(format!("potential '{name}' is one-dimensional, requested d = {dim}")))
        }
    };
    match name {
        "gaussian" => Ok(Arc::new(GaussianPotential::new(dim))),
        "soft_abs" => one_d(Arc::new(SoftAbsPotential::new())),
        "double_well" => one_d(Arc::new(QuarticPotential::new())),
        _ => Err(Error::Config(format!("unknown potential '{name}'"))),
    }
}

/// A game id with string parameters, as read from a config file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameSpec {
    pub game: String,
    pub potential: Option<String>,
    pub params: BTreeMap<String, String>,
}

impl GameSpec {
    pub fn new(game: impl Into<String>) -> Self {
        Self { game: game.into(), potential: None, params: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_potential(mut self, p: &str) -> Self {
        self.potential = Some(p.to_string());
        self
    }

    pub fn entry(&self) -> Result<CatalogEntry> {
        builtin_games()
            .into_iter()
            .find(|e| e.name == self.game)
            .ok_or_else(|| Error::Config(format!("unknown game '{}'", self.game)))
    }

    /// Whether `key` is a parameter of this game (or a declared-constant override).
    pub fn accepts(&self, key: &str) -> bool {
        self.entry().map(|e| e.params.iter().any(|(k, _)| *k == key)).unwrap_or(false) || DECLARE_KEYS.contains(&key)
    }

    fn validate(&self) -> Result<CatalogEntry> {
        let e = self.entry()?;
        for k in self.params.keys() {
            if !self.accepts(k) {
                return Err(Error::Config(format!("game '{}' has no parameter '{k}'", self.game)));
            }
        }
        Ok(e)
    }

    fn raw(&self, e: &CatalogEntry, key: &str) -> String {
        self.params
            .get(key)
            .cloned()
            .or_else(|| e.params.iter().find(|(k, _)| *k == key).map(|(_, v)| v.to_string()))
            .unwrap_or_default()
    }

    fn num(&self, e: &CatalogEntry, key: &str) -> Result<f64> {
        let s = self.raw(e, key);
        match s.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::Config(format!("parameter '{key}' = '{s}' is not a finite number"))),
        }
    }

    fn dim(&self, e: &CatalogEntry) -> Result<usize> {
        if !e.params.iter().any(|(k, _)| *k == "d") {
            return Ok(1);
        }
        let s = self.raw(e, "d");
        match s.trim().parse::<usize>() {
            Ok(d) if d >= 1 => Ok(d),
            _ => Err(Error::Config(format!("parameter 'd' = '{s}' must be a positive integer"))),
        }
    }

    pub fn build_cost(&self) -> Result<Arc<dyn MeanFieldCost>> {
        let e = self.validate()?;
        let cfg = |r: Result<Arc<dyn MeanFieldCost>>| r.map_err(|err| Error::Config(err.to_string()));
        let cost: Arc<dyn MeanFieldCost> = match e.name {
            "lq" => Arc::new(Lq::new(self.dim(&e)?, self.num(&e, "a")?, self.num(&e, "b")?)),
            "quad" => Arc::new(Lq::quadratic(self.dim(&e)?)),
            "convolution" => {
                let kernel = match self.raw(&e, "phi").as_str() {
                    "sin" => Kernel::Sin,
                    "tanh" => Kernel::Tanh,
                    other => return Err(Error::Config(format!("unknown convolution kernel '{other}'"))),
                };
                let c = self.num(&e, "c")?;
                let well = match self.raw(&e, "well").as_str() {
                    "quadratic" => Well::Quadratic { c },
                    "flat" => Well::Flat { c, half_width: self.num(&e, "half_width")? },
                    other => return Err(Error::Config(format!("unknown well '{other}'"))),
                };
                cfg(Convolution::new(kernel, self.num(&e, "amp")?, well).map(|c| Arc::new(c) as _))?
            }
            "rank_one" => Arc::new(RankOne::new()),
            "anti_convolution" => {
                cfg(AntiConvolution::new(self.num(&e, "C")?, self.num(&e, "beta")?).map(|c| Arc::new(c) as _))?
            }
            "weak_dm" => cfg(WeakDm::new(self.num(&e, "kappa")?).map(|c| Arc::new(c) as _))?,
            "sincos" => Arc::new(SinCos::new()),
            name => {
                return Err(Error::Config(format!("'{name}' is a finite-player game, not a mean-field cost")));
            }
        };
        self.apply_declarations(cost)
    }

    fn apply_declarations(&self, cost: Arc<dyn MeanFieldCost>) -> Result<Arc<dyn MeanFieldCost>> {
        if !self.params.keys().any(|k| k.starts_with("declare.")) {
            return Ok(cost);
        }
        let mut c = cost.constants().clone();
        let num = |k: &str| -> Result<Option<f64>> {
            match self.params.get(k) {
                None => Ok(None),
                Some(s) => s
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(Some)
                    .ok_or_else(|| Error::Config(format!("'{k}' = '{s}' is not a finite number"))),
            }
        };
        if let Some(v) = num("declare.dm_constant")? {
            c.dm_constant = v;
        }
        if let Some(v) = num("declare.lipschitz")? {
            c.lipschitz_bound = v;
        }
        let (a, c1, c2) = (num("declare.alpha")?, num("declare.c1")?, num("declare.c2")?);
        if a.is_some() || c1.is_some() || c2.is_some() {
            let base = c.dissipativity.unwrap_or(Dissipativity { alpha: 0.0, c1: 0.0, c2: 0.0 });
            c.dissipativity =
                Some(Dissipativity { alpha: a.unwrap_or(base.alpha), c1: c1.unwrap_or(base.c1), c2: c2.unwrap_or(base.c2) });
        }
        if let Some(s) = self.params.get("declare.lasry_lions") {
            c.lasry_lions = s
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("'declare.lasry_lions' = '{s}' is not a boolean")))?;
        }
        Ok(Arc::new(Declared { inner: cost, constants: c }))
    }

    pub fn build_potential(&self, dim: usize) -> Result<Arc<dyn Potential>> {
        let e = self.entry()?;
        build_potential(self.potential.as_deref().unwrap_or(e.default_potential), dim)
    }

    pub fn build_instance(&self, sigma: f64) -> Result<GameInstance> {
        let cost = self.build_cost()?;
        let pot = self.build_potential(cost.dim())?;
        GameInstance::new(cost, pot, sigma).map_err(|e| Error::Config(e.to_string()))
    }

    /// The `N`-player game: the symmetrization of a mean-field cost, or a
    /// finite-player built-in.
    pub fn build_finite_game(&self, n: usize) -> Result<FinitePlayerGame> {
        let e = self.validate()?;
        if e.finite_player {
            if n != 2 {
                return Err(Error::Config(format!("'{}' is a 2-player game, requested N = {n}", e.name)));
            }
            return Ok(sincos2p());
        }
        symmetrize(self.build_cost()?, n).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Convenience: the default-parameter cost of a catalog entry.
pub fn build_cost(name: &str) -> Result<Arc<dyn MeanFieldCost>> {
    GameSpec::new(name).build_cost()
}

/// A cost with user-declared constants in place of the shipped ones.
#[derive(Debug)]
struct Declared {
    inner: Arc<dyn MeanFieldCost>,
    constants: CostConstants,
}

impl MeanFieldCost for Declared {
    fn id(&self) -> String {
        format!("{}+declared", self.inner.id())
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &[f64], m: AtomView<'_>) -> f64 {
        self.inner.eval(x, m)
    }

    fn grad_x(&self, x: &[f64], m: AtomView<'_>, out: &mut [f64]) {
        self.inner.grad_x(x, m, out)
    }

    fn flat_deriv(&self, x: &[f64], m: AtomView<'_>, y: &[f64]) -> Option<f64> {
        self.inner.flat_deriv(x, m, y)
    }

    fn lions_deriv(&self, x: &[f64], m: AtomView<'_>, y: &[f64], out: &mut [f64]) -> bool {
        self.inner.lions_deriv(x, m, y, out)
    }

    fn constants(&self) -> &CostConstants {
        &self.constants
    }

    fn linear_statistics(&self) -> Option<&dyn LinearStatistics> {
        self.inner.linear_statistics()
    }

    fn lq_coefficients(&self) -> Option<(f64, f64)> {
        self.inner.lq_coefficients()
    }

    fn analytic_mfe(&self) -> Option<DiscreteMeasure> {
        self.inner.analytic_mfe()
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_mean_field_entry_builds() {
        for e in builtin_games() {
            let s = GameSpec::new(e.name);
            if e.finite_player {
                assert!(s.build_cost().is_err());
                assert_eq!(s.build_finite_game(2).unwrap().n_players(), 2);
            } else {
                let g = s.build_instance(0.25).unwrap();
                assert_eq!(g.dim(), 1);
            }
        }
    }

    #[test]
    fn unknown_names_and_params_are_config_errors() {
        assert!(matches!(GameSpec::new("nope").build_cost(), Err(Error::Config(_))));
        assert!(matches!(GameSpec::new("lq").with("zeta", 1).build_cost(), Err(Error::Config(_))));
        assert!(matches!(GameSpec::new("lq").with("a", "x").build_cost(), Err(Error::Config(_))));
        assert!(matches!(GameSpec::new("anti_convolution").with("C", 0.1).build_cost(), Err(Error::Config(_))));
        assert!(matches!(GameSpec::new("weak_dm").build_instance(0.0), Err(Error::Config(_))));
        assert!(matches!(GameSpec::new("lq").with("d", 2).with_potential("soft_abs").build_instance(0.1), Err(Error::Config(_))));
    }

    #[test]
    fn parameters_reach_the_cost() {
        let c = GameSpec::new("lq").with("a", 2).with("b", -0.25).build_cost().unwrap();
        assert_eq!(c.lq_coefficients(), Some((2.0, -0.25)));
        assert_eq!(c.constants().dm_constant, 1.75);
    }

    #[test]
    fn declared_constants_override() {
        let c = GameSpec::new("lq").with("a", 0.5).with("b", 0).with("declare.alpha", 2).with("declare.c1", 1).build_cost().unwrap();
        let d = c.constants().dissipativity.unwrap();
        assert_eq!((d.alpha, d.c1, d.c2), (2.0, 1.0, 0.0));
    }
}

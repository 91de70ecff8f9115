use std::collections::BTreeMap;
use std::path::PathBuf;

use mfgl_core::dynamics::{DriftPath, InitialLaw, SdeConfig};
use mfgl_core::game::GameSpec;
use mfgl_core::meanfield::FixedPointOptions;
use mfgl_core::measures::GridSpec;
use mfgl_core::{Error, Result};

/// Run keys with their defaults. Any other key must be a parameter of the
/// selected game (or a `declare.*` override).
pub const KEYS: &[(&str, &str)] = &[
    ("game", "lq"),
    ("potential", ""),
    ("sigma", "0.25"),
    ("sigmas", "0.2,0.1,0.05,0.025"),
    ("n", "100"),
    ("ns", "50,100,200,400"),
    ("dt", "0.001"),
    ("t_end", "1"),
    ("record_every", "10"),
    ("replicas", "1"),
    ("seed", "0"),
    ("grid_lo", "-8"),
    ("grid_hi", "8"),
    ("grid_nodes", "4001"),
    ("search_lo", "-6"),
    ("search_hi", "6"),
    ("search_nodes", "2001"),
    ("tol", "1e-10"),
    ("max_iter", "5000"),
    ("damping", "0.5"),
    ("init_mean", "1"),
    ("init_std", "1"),
    ("offset", "0"),
    ("y_offset", "1"),
    ("reference", "exact_lq"),
    ("proxy_m", "0"),
    ("path", "auto"),
    ("snapshots", "false"),
    ("trials", "1000"),
    ("steps", "20"),
    ("slope_tol", "0.05"),
    ("slack", "0.15"),
    ("r2_min", "0.98"),
    ("c_const", "1"),
    ("radii", ""),
    ("p", "2"),
    ("ode_dt", "0.01"),
    ("ode_t_end", "50"),
    ("gap_tol", "1e-6"),
    ("seeds", "8"),
    ("t_min", "1"),
];

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{k}'", i + 1)));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub experiment: String,
    pub spec: GameSpec,
    /// All resolved keys (defaults included), in key order.
    pub resolved: BTreeMap<String, String>,
    pub out_root: PathBuf,
}

fn bad(key: &str, v: &str, what: &str) -> Error {
    Error::Config(format!("{key} = '{v}': {what}"))
}

impl RunConfig {
    /// Merges file keys with flag overrides (flags win) and validates them.
    pub fn resolve(
        experiment: &str,
        file: BTreeMap<String, String>,
        flags: BTreeMap<String, String>,
        out_root: PathBuf,
    ) -> Result<Self> {
        let mut merged = file;
        merged.extend(flags);
        let mut resolved: BTreeMap<String, String> = KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let game = merged.get("game").cloned().unwrap_or_else(|| "lq".into());
        let mut spec = GameSpec::new(game);
        spec.entry()?;
        for (k, v) in merged {
            if resolved.contains_key(&k) {
                resolved.insert(k, v);
            } else if spec.accepts(&k) {
                resolved.insert(format!("param.{k}"), v.clone());
                spec.params.insert(k, v);
            } else {
                return Err(Error::Config(format!("unknown key '{k}' for game '{}'", spec.game)));
            }
        }
        let pot = &resolved["potential"];
        if !pot.is_empty() {
            spec.potential = Some(pot.clone());
        }
        let cfg = Self { experiment: experiment.to_string(), spec, resolved, out_root };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        // cheap range checks up front so every bad value maps to a config error
        for k in ["sigma", "dt", "t_end", "tol", "damping", "init_std", "slope_tol", "r2_min", "c_const", "p", "ode_dt", "ode_t_end", "gap_tol", "t_min"] {
            let v = self.f(k)?;
            let ok = match k {
                "init_std" => v >= 0.0,
                _ => v > 0.0,
            };
            if !ok {
                return Err(bad(k, &self.resolved[k], "out of range"));
            }
        }
        for k in ["n", "record_every", "replicas", "grid_nodes", "search_nodes", "max_iter", "trials", "steps", "seeds"] {
            if self.u(k)? == 0 {
                return Err(bad(k, &self.resolved[k], "must be at least 1"));
            }
        }
        let sigmas = self.f_list("sigmas")?;
        if sigmas.iter().any(|s| !(*s > 0.0)) || sigmas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(bad("sigmas", &self.resolved["sigmas"], "must be positive and strictly decreasing"));
        }
        let ns = self.u_list("ns")?;
        if ns[0] == 0 || ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("ns", &self.resolved["ns"], "must be positive and strictly increasing"));
        }
        self.f_list("radii")?;
        self.f("offset")?;
        self.f("y_offset")?;
        self.f("init_mean")?;
        self.f("slack")?;
        self.u64("seed")?;
        self.u("proxy_m")?;
        self.sde()?;
        self.grid()?;
        self.search_grid()?;
        self.path()?;
        self.b("snapshots")?;
        match self.s("reference") {
            "exact_lq" | "proxy" => {}
            other => return Err(bad("reference", other, "expected exact_lq or proxy")),
        }
        if !(self.f("damping")? <= 1.0) {
            return Err(bad("damping", &self.resolved["damping"], "must lie in (0, 1]"));
        }
        let as_config = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        let dim = if self.spec.entry()?.finite_player {
            self.spec.build_finite_game(2).map_err(as_config)?.dim()
        } else {
            self.spec.build_cost().map_err(as_config)?.dim()
        };
        self.spec.build_potential(dim).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn s(&self, k: &str) -> &str {
        self.resolved.get(k).map(String::as_str).unwrap_or("")
    }

    pub fn f(&self, k: &str) -> Result<f64> {
        let v = self.s(k);
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(bad(k, v, "not a finite number")),
        }
    }

    pub fn u(&self, k: &str) -> Result<usize> {
        let v = self.s(k);
        v.parse().map_err(|_| bad(k, v, "not a non-negative integer"))
    }

    pub fn u64(&self, k: &str) -> Result<u64> {
        let v = self.s(k);
        v.parse().map_err(|_| bad(k, v, "not a non-negative integer"))
    }

    pub fn b(&self, k: &str) -> Result<bool> {
        match self.s(k) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            v => Err(bad(k, v, "not a boolean")),
        }
    }

    pub fn f_list(&self, k: &str) -> Result<Vec<f64>> {
        let v = self.s(k);
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| match s.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(bad(k, v, "not a list of finite numbers")),
            })
            .collect()
    }

    pub fn u_list(&self, k: &str) -> Result<Vec<usize>> {
        let v = self.s(k);
        let out: Vec<usize> = v
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| bad(k, v, "not a list of integers")))
            .collect::<Result<_>>()?;
        if out.is_empty() {
            return Err(bad(k, v, "empty list"));
        }
        Ok(out)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let g = GridSpec { lo: self.f("grid_lo")?, hi: self.f("grid_hi")?, nodes: self.u("grid_nodes")? };
        g.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(g)
    }

    pub fn search_grid(&self) -> Result<GridSpec> {
        let g = GridSpec { lo: self.f("search_lo")?, hi: self.f("search_hi")?, nodes: self.u("search_nodes")? };
        g.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(g)
    }

    pub fn path(&self) -> Result<DriftPath> {
        match self.s("path") {
            "auto" => Ok(DriftPath::Auto),
            "general" => Ok(DriftPath::General),
            v => Err(bad("path", v, "expected auto or general")),
        }
    }

    pub fn sde(&self) -> Result<SdeConfig> {
        let c = SdeConfig {
            dt: self.f("dt")?,
            t_end: self.f("t_end")?,
            seed: self.u64("seed")?,
            record_every: self.u("record_every")?,
            replicas: self.u("replicas")?,
        };
        c.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(c)
    }

    pub fn law(&self) -> Result<InitialLaw> {
        Ok(InitialLaw { mean: self.f("init_mean")?, std: self.f("init_std")? })
    }

    pub fn fixed_point(&self) -> Result<FixedPointOptions> {
        Ok(FixedPointOptions {
            tol: self.f("tol")?,
            max_iter: self.u("max_iter")?,
            damping: self.f("damping")?,
            ..FixedPointOptions::default()
        })
    }

    /// `key=value` lines of the experiment and every resolved key.
    pub fn canonical(&self) -> String {
        let mut s = format!("experiment={}\n", self.experiment);
        for (k, v) in &self.resolved {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }

    /// `<out_root>/<experiment>-<hash of the resolved config>`.
    pub fn run_dir(&self) -> PathBuf {
        self.out_root.join(format!("{}-{:016x}", self.experiment, fnv1a(self.canonical().as_bytes())))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blanks() {
        let m = parse_kv("# header\n\ngame = lq  # inline\n a=2\n").unwrap();
        assert_eq!(m["game"], "lq");
        assert_eq!(m["a"], "2");
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn malformed_lines() {
        assert!(parse_kv("game lq").is_err());
        assert!(parse_kv("=3").is_err());
        assert!(parse_kv("a=1\na=2").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = parse_kv("game = lq\nsigma = 0.5\na = 2").unwrap();
        let flags = [("sigma".to_string(), "0.1".to_string())].into_iter().collect();
        let c = RunConfig::resolve("simulate", file, flags, "runs".into()).unwrap();
        assert_eq!(c.f("sigma").unwrap(), 0.1);
        assert_eq!(c.spec.params["a"], "2");
    }

    #[test]
    fn unknown_keys_and_games() {
        let k = |s: &str| RunConfig::resolve("x", parse_kv(s).unwrap(), BTreeMap::new(), "r".into());
        assert!(matches!(k("game = nope"), Err(Error::Config(_))));
        assert!(matches!(k("kappa = 1"), Err(Error::Config(_))));
        assert!(matches!(k("sigma = -1"), Err(Error::Config(_))));
        assert!(matches!(k("game = weak_dm\nkappa = 1"), Ok(_)));
    }

    #[test]
    fn run_dir_depends_on_config() {
        let a = RunConfig::resolve("x", parse_kv("seed = 1").unwrap(), BTreeMap::new(), "r".into()).unwrap();
        let b = RunConfig::resolve("x", parse_kv("seed = 2").unwrap(), BTreeMap::new(), "r".into()).unwrap();
        assert_ne!(a.run_dir(), b.run_dir());
        assert_eq!(a.run_dir(), a.clone().run_dir());
    }
}

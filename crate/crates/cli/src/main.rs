//! `mfgl`: runs the simulations and experiment reports of `mfgl-core`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure (blow-up,
//! non-convergence), 4 verdict failure, 1 I/O failure.

mod commands;
mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfgl_core::Error;

use config::{parse_kv, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "mfgl", version, about = "Mean-field Langevin game experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root (default: $MFGL_OUT_DIR, else ./runs).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: machine parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(flatten)]
    keys: KeyFlags,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// List built-in games and potentials.
    Catalog,
    /// Euler-Maruyama run of the particle system; writes series CSVs.
    Simulate,
    /// Invariant measure by damped fixed-point iteration.
    Invariant,
    /// Invariant measures along a sigma list and the sigma-rate check.
    SigmaSweep,
    /// Synchronous-coupling contraction rate.
    Contraction,
    /// Uniform-in-time propagation of chaos.
    Poc,
    /// Nash equilibria of the N-player games converging to the MFE.
    Nash,
    /// Epsilon-Nash property of i.i.d. samples from the MFE.
    EpsilonNash,
    /// Randomized Lasry-Lions / displacement monotonicity probe.
    Probe,
    /// Concentration of the particle system around the Nash profile.
    Concentration,
    /// 1/t decay under weak displacement monotonicity.
    WeakDm,
    /// Per-step timing of the drift paths.
    Bench,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Catalog => "catalog",
            Command::Simulate => "simulate",
            Command::Invariant => "invariant",
            Command::SigmaSweep => "sigma-sweep",
            Command::Contraction => "contraction",
            Command::Poc => "poc",
            Command::Nash => "nash",
            Command::EpsilonNash => "epsilon-nash",
            Command::Probe => "probe",
            Command::Concentration => "concentration",
            Command::WeakDm => "weak-dm",
            Command::Bench => "bench",
        }
    }
}

macro_rules! key_flags {
    ($($field:ident),* $(,)?) => {
        /// Overrides for config keys; `--t-end` sets `t_end`, and so on.
        #[derive(Args, Debug, Default)]
        struct KeyFlags {
            $(#[arg(long, global = true, allow_hyphen_values = true)] $field: Option<String>,)*
            /// Game parameter or declared-constant override, `key=value` (repeatable).
            #[arg(long = "param", global = true, value_name = "KEY=VALUE")]
            params: Vec<String>,
        }

        impl KeyFlags {
            fn to_map(&self) -> Result<BTreeMap<String, String>, Error> {
                let mut m = BTreeMap::new();
                $(if let Some(v) = &self.$field { m.insert(stringify!($field).to_string(), v.clone()); })*
                for p in &self.params {
                    let (k, v) = p.split_once('=').ok_or_else(|| Error::Config(format!("--param '{p}' is not key=value")))?;
                    m.insert(k.trim().to_string(), v.trim().to_string());
                }
                Ok(m)
            }
        }
    };
}

key_flags!(
    game, potential, sigma, sigmas, n, ns, dt, t_end, record_every, replicas, seed, grid_lo, grid_hi, grid_nodes,
    search_lo, search_hi, search_nodes, tol, max_iter, damping, init_mean, init_std, offset, y_offset, reference,
    proxy_m, path, snapshots, trials, steps, slope_tol, slack, r2_min, c_const, radii, p, ode_dt, ode_t_end, gap_tol,
    seeds, t_min,
);

fn exit_code(e: &Error) -> u8 {
    match e {
        _ if e.is_numeric() => 3,
        Error::Io(_) | Error::Csv(_) => 1,
        _ => 2,
    }
}

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            parse_kv(&text)?
        }
        None => BTreeMap::new(),
    };
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("MFGL_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    RunConfig::resolve(cli.command.name(), file, cli.keys.to_map()?, out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(w) = cli.workers {
        if w == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    if let Command::Catalog = cli.command {
        print!("{}", commands::catalog());
        return ExitCode::SUCCESS;
    }
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    match commands::run(cli.command.name(), &cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

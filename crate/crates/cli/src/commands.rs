use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mfgl_core::analysis::{
    concentration_report, contraction_report, epsilon_nash_report, finite_nash_report, invariant_report,
    nash_convergence_report, poc_report, probe_report, sigma_rate_from_sweep, weak_dm_report, ConcentrationOptions,
    ContractionOptions, ExperimentReport, NashOptions, PocOptions, WeakDmOptions,
};
use mfgl_core::dynamics::{
    bench_drift, cesaro_window, ode_gradient_flow, simulate_interacting, write_series_csv, write_snapshot_csv,
    MeanFieldReference, ParticleState, SimulationOptions,
};
use mfgl_core::game::{builtin_games, builtin_potentials, symmetrize, ProbeOptions};
use mfgl_core::meanfield::{analytic_mfe, mfe_sigma_sweep};
use mfgl_core::measures::{write_grid_csv, Measure};
use mfgl_core::{Error, Result};

use crate::config::RunConfig;

pub fn catalog() -> String {
    let mut s = String::from("games:\n");
    for e in builtin_games() {
        let params: Vec<String> = e.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(s, "  {:<17} {}", e.name, e.summary);
        let _ = writeln!(
            s,
            "  {:<17} params: [{}] potential: {}{}",
            "",
            params.join(", "),
            e.default_potential,
            if e.finite_player { " (finite-player)" } else { "" }
        );
    }
    s.push_str("potentials:\n");
    for (name, summary) in builtin_potentials() {
        let _ = writeln!(s, "  {name:<17} {summary}");
    }
    s
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn emit(dir: &Path, report: &ExperimentReport) -> Result<bool> {
    write(dir, "report.txt", &report.to_text())?;
    write(dir, "summary.txt", &report.to_summary())?;
    print!("{}", report.to_text());
    Ok(report.passed)
}

/// Runs one experiment; `Ok(verdict)`.
pub fn run(command: &str, cfg: &RunConfig) -> Result<bool> {
    let dir = cfg.run_dir();
    fs::create_dir_all(&dir)?;
    write(&dir, "config.txt", &cfg.canonical())?;
    println!("run directory: {}", dir.display());
    match command {
        "simulate" => simulate(cfg, &dir),
        "invariant" => {
            let inst = cfg.spec.build_instance(cfg.f("sigma")?)?;
            let (rep, res) = invariant_report(&inst, cfg.grid()?, &cfg.fixed_point()?)?;
            write_grid_csv(&res.measure, fs::File::create(dir.join("invariant.csv"))?)?;
            emit(&dir, &rep)
        }
        "sigma-sweep" => {
            let inst = cfg.spec.build_instance(cfg.f_list("sigmas")?.first().copied().unwrap_or(1.0))?;
            let (grid, fp) = (cfg.grid()?, cfg.fixed_point()?);
            let sweep = mfe_sigma_sweep(&inst, &cfg.f_list("sigmas")?, grid, &fp, &cfg.search_grid()?)?;
            let mut table = String::from("sigma,iterations,residual,w2_to_smallest\n");
            for (k, m) in sweep.measures.iter().enumerate() {
                write_grid_csv(&m.measure, fs::File::create(dir.join(format!("density_sigma{}.csv", m.sigma)))?)?;
                let _ = writeln!(table, "{:?},{},{:?},{:?}", m.sigma, m.iterations, m.residual, sweep.w2_to_smallest[k]);
            }
            write(&dir, "sweep.csv", &table)?;
            emit(&dir, &sigma_rate_from_sweep(&inst, &sweep, grid, &fp, cfg.f("slope_tol")?)?)
        }
        "contraction" => {
            let inst = cfg.spec.build_instance(cfg.f("sigma")?)?;
            let sde = cfg.sde()?;
            let x0 = cfg.law()?.sample(cfg.u("n")?, inst.dim(), sde.seed, 0)?;
            let y0 = x0.shifted(cfg.f("y_offset")?);
            let opts = ContractionOptions { slack: cfg.f("slack")?, r2_min: cfg.f("r2_min")?, path: cfg.path()? };
            emit(&dir, &contraction_report(&inst, &x0, &y0, &sde, &opts)?)
        }
        "poc" => {
            let inst = cfg.spec.build_instance(cfg.f("sigma")?)?;
            let reference = match cfg.s("reference") {
                "proxy" => MeanFieldReference::Proxy { m: cfg.u("proxy_m")? },
                _ => MeanFieldReference::ExactLq,
            };
            let opts = PocOptions { law: cfg.law()?, offset: cfg.f("offset")?, ..PocOptions::default() };
            emit(&dir, &poc_report(&inst, &cfg.u_list("ns")?, &cfg.sde()?, reference, &opts)?)
        }
        "nash" => nash(cfg, &dir),
        "epsilon-nash" => {
            let cost = cfg.spec.build_cost()?;
            let search = cfg.search_grid()?;
            let m0: Measure = match analytic_mfe(cost.as_ref(), &search)? {
                Some(m) => m.measure,
                None => {
                    let inst = cfg.spec.build_instance(1.0)?;
                    mfe_sigma_sweep(&inst, &cfg.f_list("sigmas")?, cfg.grid()?, &cfg.fixed_point()?, &search)?.mfe.measure
                }
            };
            let rep = epsilon_nash_report(cost.as_ref(), &m0, &cfg.u_list("ns")?, cfg.u("seeds")?, cfg.u64("seed")?, &search)?;
            emit(&dir, &rep)
        }
        "probe" => {
            let cost = cfg.spec.build_cost()?;
            emit(&dir, &probe_report(cost.as_ref(), cfg.u("trials")?, cfg.u64("seed")?, &ProbeOptions::default())?)
        }
        "concentration" => {
            let inst = cfg.spec.build_instance(cfg.f("sigma")?)?;
            let sde = cfg.sde()?;
            let n = cfg.u("n")?;
            let game = symmetrize(inst.cost.clone(), n)?;
            let x0 = cfg.law()?.sample(n, 1, sde.seed, u64::MAX)?;
            let (dt, t) = (cfg.f("ode_dt")?, cfg.f("ode_t_end")?);
            let nash = cesaro_window(&ode_gradient_flow(&game, &x0.positions, dt, t)?, t / 2.0, t)?;
            let opts = ConcentrationOptions {
                c_const: cfg.f("c_const")?,
                radii: cfg.f_list("radii")?,
                law: cfg.law()?,
                ..ConcentrationOptions::default()
            };
            emit(&dir, &concentration_report(&inst, &ParticleState::from_1d(nash)?, &sde, &opts)?)
        }
        "weak-dm" => {
            let inst = cfg.spec.build_instance(cfg.f("sigma")?)?;
            let sde = cfg.sde()?;
            let x0 = cfg.law()?.sample(cfg.u("n")?, inst.dim(), sde.seed, 0)?;
            let y0 = x0.shifted(cfg.f("y_offset")?);
            let opts = WeakDmOptions { t_min: cfg.f("t_min")?, ..WeakDmOptions::default() };
            emit(&dir, &weak_dm_report(&inst, &x0, &y0, &sde, &opts)?)
        }
        "bench" => {
            let inst = cfg.spec.build_instance(cfg.f("sigma")?)?;
            let rows = bench_drift(&inst, &cfg.u_list("ns")?, cfg.u("steps")?, cfg.u64("seed")?)?;
            let mut table = String::from("n,path,seconds_per_step\n");
            for r in &rows {
                let _ = writeln!(table, "{},{},{:e}", r.n, r.path.name(), r.seconds_per_step);
            }
            write(&dir, "bench.csv", &table)?;
            print!("{table}");
            Ok(true)
        }
        other => Err(Error::Config(format!("unknown command '{other}'"))),
    }
}

fn simulate(cfg: &RunConfig, dir: &Path) -> Result<bool> {
    let inst = cfg.spec.build_instance(cfg.f("sigma")?)?;
    let sde = cfg.sde()?;
    let x0 = cfg.law()?.sample(cfg.u("n")?, inst.dim(), sde.seed, 0)?;
    let opts = SimulationOptions { path: cfg.path()?, snapshots: cfg.b("snapshots")?, ..SimulationOptions::default() };
    let results = simulate_interacting(&inst, &x0, &sde, &opts)?;
    for res in &results {
        for w in &res.warnings {
            eprintln!("warning: {w}");
        }
        write_series_csv(&res.series, fs::File::create(dir.join(format!("series_r{}.csv", res.replica)))?)?;
        if !res.snapshots.is_empty() {
            write_snapshot_csv(&res.snapshots, fs::File::create(dir.join(format!("snapshots_r{}.csv", res.replica)))?)?;
        }
        let m2 = res.series("second_moment").and_then(|s| s.values.last().copied()).unwrap_or(f64::NAN);
        println!("replica {}: final second moment {m2:.6e}", res.replica);
    }
    Ok(true)
}

fn nash(cfg: &RunConfig, dir: &Path) -> Result<bool> {
    let entry = cfg.spec.entry()?;
    let (dt, t) = (cfg.f("ode_dt")?, cfg.f("ode_t_end")?);
    if entry.finite_player {
        let game = cfg.spec.build_finite_game(2)?;
        let x0 = cfg.law()?.sample(game.n_players(), game.dim(), cfg.u64("seed")?, u64::MAX)?;
        let (rep, _) = finite_nash_report(&game, &x0.positions, dt, t, &cfg.search_grid()?, cfg.f("gap_tol")?)?;
        return emit(dir, &rep);
    }
    let opts = NashOptions {
        p: cfg.f("p")?,
        dt,
        t_end: t,
        seed: cfg.u64("seed")?,
        init_std: cfg.f("init_std")?,
        gap_tol: cfg.f("gap_tol")?,
        search_grid: cfg.search_grid()?,
    };
    emit(dir, &nash_convergence_report(cfg.spec.build_cost()?, &cfg.u_list("ns")?, &opts)?)
}

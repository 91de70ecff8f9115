use std::sync::Arc;

use mfgl_core::analysis::*;
use mfgl_core::dynamics::*;
use mfgl_core::game::*;
use mfgl_core::meanfield::{analytic_mfe, FixedPointOptions};
use mfgl_core::measures::GridSpec;
use mfgl_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn lq(a: f64, b: f64, sigma: f64) -> GameInstance {
    GameSpec::new("lq").with("a", a).with("b", b).build_instance(sigma).unwrap()
}

fn state(seed: u64, n: usize) -> ParticleState {
    InitialLaw { mean: 0.5, std: 1.0 }.sample(n, 1, seed, 0).unwrap()
}

fn search() -> GridSpec {
    GridSpec::new(-6.0, 6.0, 2001).unwrap()
}

/// `recompute` must reproduce every check and measurement from params + series.
fn assert_recomputes(r: &ExperimentReport) {
    let back = recompute(r).unwrap();
    assert_eq!(back.checks, r.checks, "{}", r.name);
    assert_eq!(back.measured, r.measured, "{}", r.name);
    assert_eq!(back.passed, r.passed);
    let parsed = ExperimentReport::from_summary(&r.to_summary()).unwrap();
    assert_eq!(parsed.checks, r.checks);
    assert_eq!(parsed.passed, r.passed);
}

#[test]
fn noisy_exponential_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t: Vec<f64> = (0..=400).map(|k| k as f64 * 0.005).collect();
    let v = t
        .iter()
        .map(|s| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (-3.0 * s).exp() * (1.0 + 0.02 * z)
        })
        .collect();
    let s = StatSeries::new("noisy", t, v).unwrap();
    let f = fit_exponential_rate(&s, default_window(&s)).unwrap();
    assert!((f.slope + 3.0).abs() <= 0.05, "{}", f.slope);
    assert!(f.r_squared > 0.98);
    assert_eq!(f.window, (0.4, 2.0));
}

#[test]
fn line_fit_basics() {
    let f = fit_line(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
    assert!((f.slope - 2.0).abs() < 1e-15 && (f.intercept - 1.0).abs() < 1e-15);
    assert!(f.slope_se < 1e-12);
    assert!(fit_line(&[1.0], &[1.0]).is_err());
    assert!(fit_line(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    let (m, se) = mean_se(&[1.0, 2.0, 3.0]);
    assert_eq!(m, 2.0);
    assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
}

#[test]
fn contraction_matches_analytic_rates() {
    let (a, b, s) = (1.0, 0.5, 0.25);
    let inst = lq(a, b, s);
    let n = 200;
    let x0 = state(3, n);
    let cfg = SdeConfig { dt: 1e-3, t_end: 4.0, seed: 2, record_every: 10, replicas: 1 };
    // constant shift: only the mean mode is excited, decaying at 2(a + b + σ)
    let r = contraction_report(&inst, &x0, &x0.shifted(1.0), &cfg, &ContractionOptions::default()).unwrap();
    let common = 2.0 * (a + b + s);
    let fitted = r.measured("fitted_rate").unwrap();
    assert!((fitted - common).abs() <= 0.15 * common, "{fitted}");
    assert!(r.passed);
    assert_recomputes(&r);
    // zero-mean ±δ shift: fluctuation modes decay at 2(a + σ − b/(N−1))
    let d: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 0.5 } else { -0.5 }).collect();
    let y0 = ParticleState::from_1d(x0.positions.iter().zip(&d).map(|(x, e)| x + e).collect()).unwrap();
    let r = contraction_report(&inst, &x0, &y0, &cfg, &ContractionOptions::default()).unwrap();
    let fluct = 2.0 * (a + s - b / (n as f64 - 1.0));
    let fitted = r.measured("fitted_rate").unwrap();
    assert!((fitted - fluct).abs() <= 0.02 * fluct, "{fitted} vs {fluct}");
    assert!(fitted >= 2.125);
    assert!(r.passed);
}

#[test]
fn contraction_edge_cases() {
    let inst = lq(1.0, 0.5, 0.25);
    let x0 = state(3, 50);
    let cfg = SdeConfig { dt: 1e-2, t_end: 2.0, seed: 2, record_every: 5, replicas: 1 };
    let r = contraction_report(&inst, &x0, &x0, &cfg, &ContractionOptions::default()).unwrap();
    assert!(r.passed && !r.notes.is_empty());
    assert_recomputes(&r);
    // with no slack the Euler rate −log(1 − λdt)/dt > λ still clears the bound for the mean mode
    let strict = ContractionOptions { slack: 0.0, ..Default::default() };
    let r = contraction_report(&inst, &x0, &x0.shifted(1.0), &cfg, &strict).unwrap();
    assert!(r.passed);
    let unstable = lq(-0.5, 0.0, 0.25);
    assert!(matches!(
        contraction_report(&unstable, &x0, &x0.shifted(1.0), &cfg, &ContractionOptions::default()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn poc_report_behaviour() {
    let inst = lq(1.0, 0.5, 0.25);
    let cfg = SdeConfig { dt: 1e-2, t_end: 2.0, seed: 4, record_every: 10, replicas: 64 };
    let ns = [20, 40, 80];
    let r = poc_report(&inst, &ns, &cfg, MeanFieldReference::ExactLq, &PocOptions::default()).unwrap();
    assert!(r.passed, "{}", r.to_text());
    assert_recomputes(&r);
    // an offset that does not shrink with N makes N·gap grow linearly
    let off = PocOptions { offset: 0.5, ..Default::default() };
    let r = poc_report(&inst, &ns, &cfg, MeanFieldReference::ExactLq, &off).unwrap();
    assert!(!r.passed);
    assert!(r.measured("S_ratio").unwrap() > 3.0);
    // no interaction: the two systems coincide
    let r = poc_report(&lq(1.0, 0.0, 0.25), &ns, &cfg, MeanFieldReference::ExactLq, &PocOptions::default()).unwrap();
    assert!(r.measured("S_N80").unwrap() < 1e-20);
    assert!(poc_report(&inst, &[40, 20], &cfg, MeanFieldReference::ExactLq, &PocOptions::default()).is_err());
}

#[test]
fn sigma_rate_reports() {
    let grid = GridSpec::new(-8.0, 8.0, 4001).unwrap();
    let fp = FixedPointOptions::default();
    let r = sigma_rate_report(&lq(1.0, 0.0, 1.0), &[0.2, 0.1, 0.05, 0.025], grid, &fp, &search(), 0.05).unwrap();
    assert!(r.passed, "{}", r.to_text());
    assert_recomputes(&r);
    assert!(sigma_rate_report(&lq(1.0, 0.0, 1.0), &[0.2], grid, &fp, &search(), 0.05).is_err());
    let anti = GameSpec::new("anti_convolution").build_instance(0.2).unwrap();
    assert!(matches!(
        sigma_rate_report(&anti, &[0.2, 0.1], grid, &fp, &search(), 0.05),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn concentration_bound_and_radius() {
    let (rate, n, s, c) = (1.25, 200, 0.05, 1.0);
    let r = concentration_radius(rate, n, s, c, 0.1);
    assert!((concentration_bound(rate, n, s, c, r) - 0.1).abs() < 1e-12);
    assert!(concentration_bound(rate, n, s, c, 2.0 * r) < 0.1);
    assert!(concentration_bound(rate, n, s, c, 0.01) >= 1.0);
}

#[test]
fn concentration_report_flags_vacuous_radii() {
    let inst = lq(1.0, 0.5, 0.25);
    let n = 20;
    let nash = ParticleState::from_1d(vec![0.0; n]).unwrap();
    let cfg = SdeConfig { dt: 1e-2, t_end: 4.0, seed: 1, record_every: 100, replicas: 8 };
    let opts = ConcentrationOptions { radii: vec![0.01], ..Default::default() };
    let r = concentration_report(&inst, &nash, &cfg, &opts).unwrap();
    assert!(r.checks.iter().any(|c| c.skipped));
    assert!(r.notes.iter().any(|n| n.contains("vacuous")));
    assert!(r.passed);
    assert_recomputes(&r);
    let short = SdeConfig { t_end: 1.0, ..cfg };
    assert!(matches!(concentration_report(&inst, &nash, &short, &opts), Err(Error::Precondition(_))));
}

fn synthetic(f: impl Fn(f64) -> f64, reps: usize) -> Vec<StatSeries> {
    let t: Vec<f64> = (0..=500).map(|k| k as f64 * 0.1).collect();
    (0..reps)
        .map(|k| {
            let v = t.iter().map(|s| f(*s) * (1.0 + 0.001 * k as f64)).collect();
            StatSeries::new(format!("coupled_msd_r{k}"), t.clone(), v).unwrap()
        })
        .collect()
}

#[test]
fn weak_dm_synthetic_series() {
    let o = WeakDmOptions::default();
    let r = weak_dm_from_series("weak_dm", synthetic(|t| 1.0 / (1.0 + t), 4), &o).unwrap();
    assert!(r.passed, "{}", r.to_text());
    let r = weak_dm_from_series("weak_dm", synthetic(|t| 1.0 / (1.0 + t).sqrt(), 4), &o).unwrap();
    assert!(!r.passed);
    let r = weak_dm_from_series("weak_dm", synthetic(|_| 0.0, 2), &o).unwrap();
    assert!(r.passed && !r.notes.is_empty());
}

#[test]
fn weak_dm_report_on_games() {
    let cfg = SdeConfig { dt: 1e-2, t_end: 10.0, seed: 1, record_every: 10, replicas: 4 };
    let inst = lq(1.0, 0.5, 0.25);
    let x0 = state(1, 100);
    let r = weak_dm_report(&inst, &x0, &x0.shifted(1.0), &cfg, &WeakDmOptions::default()).unwrap();
    assert!(r.passed, "{}", r.to_text());
    assert_recomputes(&r);
    let weak = GameSpec::new("weak_dm").build_instance(0.1).unwrap();
    let x0 = InitialLaw { mean: 5.0, std: 1.0 }.sample(100, 1, 1, 0).unwrap();
    let y0 = InitialLaw { mean: 10.0, std: 1.0 }.sample(100, 1, 2, 0).unwrap();
    let r = weak_dm_report(&weak, &x0, &y0, &cfg, &WeakDmOptions::default()).unwrap();
    assert!(r.passed, "{}", r.to_text());
    let anti = GameSpec::new("lq").with("a", -1).build_instance(0.1).unwrap();
    assert!(weak_dm_report(&anti, &x0, &y0, &cfg, &WeakDmOptions::default()).is_err());
}

#[test]
fn nash_convergence_reports() {
    let opts = NashOptions::default();
    for name in ["lq", "quad"] {
        let r = nash_convergence_report(build_cost(name).unwrap(), &[8, 16, 32, 64], &opts).unwrap();
        assert!(r.passed, "{}", r.to_text());
        assert_recomputes(&r);
    }
    let anti = build_cost("anti_convolution").unwrap();
    assert!(matches!(nash_convergence_report(anti, &[8, 16], &opts), Err(Error::Precondition(_))));
}

#[test]
fn finite_nash_sincos2p() {
    let (r, nash) = finite_nash_report(&sincos2p(), &[0.3, -0.2], 1e-2, 50.0, &search(), 1e-4).unwrap();
    assert!(r.passed);
    // symmetric root of 2x + cos²x − sin²x = 0
    for x in nash {
        assert!((x + 0.417_714_8).abs() < 1e-4, "{x}");
    }
    assert_recomputes(&r);
}

#[test]
fn probe_and_invariant_reports() {
    for name in ["lq", "rank_one", "anti_convolution", "convolution"] {
        let r = probe_report(build_cost(name).unwrap().as_ref(), 500, 3, &ProbeOptions::default()).unwrap();
        assert!(r.passed, "{name}: {}", r.to_text());
        assert_recomputes(&r);
    }
    let (r, res) = invariant_report(&lq(1.0, 0.5, 0.25), GridSpec::new(-8.0, 8.0, 4001).unwrap(), &FixedPointOptions::default()).unwrap();
    assert!(r.passed && res.residual <= 1e-10);
    assert_recomputes(&r);
}

#[test]
fn epsilon_nash_report_roundtrip() {
    let cost = GameSpec::new("convolution").with("well", "flat").build_cost().unwrap();
    let m0 = analytic_mfe(cost.as_ref(), &search()).unwrap().unwrap().measure;
    let r = epsilon_nash_report(cost.as_ref(), &m0, &[10, 100], 4, 7, &search()).unwrap();
    assert!(r.measured("median_epsilon_N10").unwrap() > r.measured("median_epsilon_N100").unwrap());
    assert_recomputes(&r);
    let again = epsilon_nash_report(cost.as_ref(), &m0, &[10, 100], 4, 7, &search()).unwrap();
    assert_eq!(again.to_summary(), r.to_summary());
}

#[test]
fn reports_are_deterministic() {
    let inst = lq(1.0, 0.5, 0.25);
    let x0 = state(3, 150);
    let cfg = SdeConfig { dt: 1e-2, t_end: 2.0, seed: 2, record_every: 5, replicas: 2 };
    let run = || contraction_report(&inst, &x0, &x0.shifted(0.3), &cfg, &ContractionOptions::default()).unwrap();
    assert_eq!(run().to_summary(), run().to_summary());
    assert_eq!(run().to_text(), run().to_text());
}

#[test]
fn recompute_rejects_unknown_reports() {
    let r = ExperimentReport::new("mystery", "none");
    assert!(recompute(&r).is_err());
    let mut r = ExperimentReport::new("contraction", "none");
    r.param("bound_rate", 1.0);
    assert!(recompute(&r).is_err());
    let _: Arc<dyn MeanFieldCost> = build_cost("lq").unwrap();
}

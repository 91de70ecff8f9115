use mfgl_core::game::*;
use mfgl_core::meanfield::*;
use mfgl_core::measures::{wasserstein_1d, DiscreteMeasure, GridMeasure1D, GridSpec, Measure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid() -> GridSpec {
    GridSpec::new(-8.0, 8.0, 4001).unwrap()
}

fn search() -> GridSpec {
    GridSpec::new(-6.0, 6.0, 2001).unwrap()
}

fn l1(g: &GridSpec, a: &GridMeasure1D, b: &GridMeasure1D) -> f64 {
    let d: Vec<f64> = a.density().iter().zip(b.density()).map(|(x, y)| (x - y).abs()).collect();
    g.integrate(&d)
}

fn lq(a: f64, b: f64, sigma: f64) -> GameInstance {
    GameSpec::new("lq").with("a", a).with("b", b).build_instance(sigma).unwrap()
}

#[test]
fn lq_invariant_closed_form() {
    // Gibbs density ∝ exp(−(a x²/2 + b x μ)/σ − x²/2) is centred Gaussian with variance σ/(a+σ)
    let g = grid();
    for (a, b, s) in [(1.0, 0.5, 0.25), (2.0, 1.0, 0.1), (1.0, 0.0, 1.0), (0.5, 0.3, 0.05)] {
        let inst = lq(a, b, s);
        let exact = GridMeasure1D::gaussian(g, 0.0, (s / (a + s)).sqrt()).unwrap();
        // shifted start breaks the symmetry that makes the cold start exact
        let init = GridMeasure1D::gaussian(g, 1.0, 0.7).unwrap();
        for start in [None, Some(&init)] {
            let r = invariant_fixed_point(&inst, g, &FixedPointOptions::default(), start).unwrap();
            assert!(r.iterations <= 50, "{a},{b},{s}: {} iterations", r.iterations);
            assert!(l1(&g, &r.measure, &exact) <= 1e-6);
            assert!(r.measure.mean().abs() < 1e-9);
        }
    }
}

#[test]
fn measure_independent_converges_on_first_check() {
    for s in [1.0, 0.25, 0.01] {
        let r = invariant_fixed_point(&lq(1.0, 0.0, s), grid(), &FixedPointOptions::default(), None).unwrap();
        assert_eq!(r.iterations, 1);
    }
}

#[test]
fn uniqueness_from_different_starts() {
    let g = grid();
    for name in ["lq", "rank_one", "convolution", "sincos"] {
        let inst = GameSpec::new(name).build_instance(0.5).unwrap();
        let o = FixedPointOptions::default();
        let a = invariant_fixed_point(&inst, g, &o, Some(&GridMeasure1D::uniform(g).unwrap())).unwrap();
        let b = invariant_fixed_point(&inst, g, &o, Some(&GridMeasure1D::gaussian(g, -1.5, 0.5).unwrap())).unwrap();
        assert!(a.measure.sup_distance(&b.measure) < 1e-8, "{name}");
    }
}

#[test]
fn fixed_point_errors() {
    let g = grid();
    let inst = lq(1.0, 0.5, 0.25);
    let bad = FixedPointOptions { damping: 1.5, ..Default::default() };
    assert!(invariant_fixed_point(&inst, g, &bad, None).is_err());
    let short = FixedPointOptions { max_iter: 1, ..Default::default() };
    let init = GridMeasure1D::gaussian(g, 1.0, 1.0).unwrap();
    assert!(matches!(invariant_fixed_point(&inst, g, &short, Some(&init)), Err(mfgl_core::Error::NoConvergence { .. })));
    let other = GridMeasure1D::uniform(GridSpec::new(-4.0, 4.0, 101).unwrap()).unwrap();
    assert!(invariant_fixed_point(&inst, g, &FixedPointOptions::default(), Some(&other)).is_err());
    // a grid too narrow for the invariant measure trips the truncation check
    let narrow = GridSpec::new(-0.5, 0.5, 201).unwrap();
    assert!(invariant_fixed_point(&inst, narrow, &FixedPointOptions::default(), None).is_err());
    let d2 = GameSpec::new("lq").with("d", 2).build_instance(0.25).unwrap();
    assert!(invariant_fixed_point(&d2, g, &FixedPointOptions::default(), None).is_err());
}

#[test]
fn warm_and_cold_sweeps_agree() {
    let g = grid();
    let o = FixedPointOptions::default();
    let inst = lq(1.0, 0.5, 0.25);
    let sigmas = [0.4, 0.2, 0.1, 0.05];
    let sweep = mfe_sigma_sweep(&inst, &sigmas, g, &o, &search()).unwrap();
    assert_eq!(sweep.sigmas, sigmas);
    assert!(sweep.failures.is_empty());
    for (s, warm) in sigmas.iter().zip(&sweep.measures) {
        let cold = invariant_fixed_point(&inst.with_sigma(*s).unwrap(), g, &o, None).unwrap();
        assert!(cold.measure.sup_distance(&warm.measure) <= 10.0 * o.tol);
    }
    assert_eq!(sweep.w2_to_smallest.len(), 4);
    assert_eq!(*sweep.w2_to_smallest.last().unwrap(), 0.0);
    assert_eq!(sweep.w2_consecutive.len(), 3);
}

#[test]
fn quad_sweep_matches_closed_form() {
    // m^σ = N(0, σ/(1+σ)), m⁰ = δ₀, W₂² = σ/(1+σ)
    let g = grid();
    let sigmas = [0.2, 0.1, 0.05, 0.025];
    let sweep = mfe_sigma_sweep(&lq(1.0, 0.0, 1.0), &sigmas, g, &FixedPointOptions::default(), &search()).unwrap();
    let dirac: Measure = DiscreteMeasure::dirac(&[0.0]).unwrap().into();
    for (s, r) in sigmas.iter().zip(&sweep.measures) {
        let w = wasserstein_1d(&r.measure.clone().into(), &dirac, 2.0).unwrap();
        assert!((w * w - s / (1.0 + s)).abs() <= 1e-4, "σ={s}: {}", w * w);
    }
}

#[test]
fn mfe_gap_decreases_along_sigma() {
    let g = grid();
    for inst in [lq(1.0, 0.0, 1.0), lq(1.0, 0.5, 1.0)] {
        let sigmas = [0.4, 0.2, 0.1, 0.05, 0.025];
        let sweep = mfe_sigma_sweep(&inst, &sigmas, g, &FixedPointOptions::default(), &search()).unwrap();
        let gaps: Vec<f64> = sweep
            .measures
            .iter()
            .map(|r| mfe_residual(inst.cost.as_ref(), &r.measure.clone().into(), &search()).unwrap())
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        assert_eq!(sweep.mfe.gap, *gaps.last().unwrap());
    }
}

#[test]
fn sweep_survives_partial_failure() {
    let g = grid();
    let o = FixedPointOptions { max_iter: 3, ..Default::default() };
    // the cold start is exact for the symmetric LQ game; the warm start at the
    // second temperature needs more than three iterations
    let r = mfe_sigma_sweep(&lq(1.0, 0.5, 1.0), &[0.5, 0.25], g, &o, &search()).unwrap();
    assert_eq!(r.sigmas, vec![0.5]);
    assert_eq!(r.failures.len(), 1);
    assert_eq!(r.failures[0].0, 0.25);
    let conv = GameSpec::new("convolution").with("phi", "tanh").build_instance(1.0).unwrap();
    let one = FixedPointOptions { max_iter: 1, ..Default::default() };
    assert!(mfe_sigma_sweep(&conv, &[0.5, 0.25], g, &one, &search()).is_err());
}

#[test]
fn gibbs_minimizes_free_energy() {
    let g = grid();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for name in ["lq", "rank_one", "convolution"] {
        let inst = GameSpec::new(name).build_instance(0.3).unwrap();
        let star = invariant_fixed_point(&inst, g, &FixedPointOptions::default(), None).unwrap().measure;
        let base = free_energy(&inst, &star, &star).unwrap();
        for _ in 0..50 {
            let c = rng.gen_range(-1.0..1.0);
            let w = rng.gen_range(0.2..1.0);
            let eps = rng.gen_range(0.01..0.5);
            let bump = star.density().iter().zip(g.points()).map(|(d, x)| d * (1.0 + eps * (-(x - c) * (x - c) / w).exp()));
            let mu = GridMeasure1D::from_unnormalized(g, bump.collect()).unwrap();
            assert!(free_energy(&inst, &mu, &star).unwrap() >= base - 1e-12, "{name}");
        }
    }
}

#[test]
fn analytic_mfe_and_residuals() {
    let lqc = build_cost("lq").unwrap();
    let m = analytic_mfe(lqc.as_ref(), &search()).unwrap().unwrap();
    assert_eq!(m.source, MfeSource::Analytic);
    assert!(m.gap < 1e-12);
    let quad = build_cost("quad").unwrap();
    for (x, want) in [(0.0, 0.0), (1.5, 1.125), (-2.0, 2.0)] {
        let d: Measure = DiscreteMeasure::dirac(&[x]).unwrap().into();
        assert!((mfe_residual(quad.as_ref(), &d, &search()).unwrap() - want).abs() < 1e-12);
    }
    // two atoms at ±1: F = x²/2 is 0.5 on the support, minimum 0
    let two: Measure = DiscreteMeasure::uniform(1, vec![-1.0, 1.0]).unwrap().into();
    assert!((mfe_residual(quad.as_ref(), &two, &search()).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn epsilon_nash_is_deterministic_and_bounded() {
    let cost = GameSpec::new("convolution").with("well", "flat").build_cost().unwrap();
    let m0 = analytic_mfe(cost.as_ref(), &search()).unwrap().unwrap().measure;
    for n in [10, 50] {
        let a = epsilon_nash_from_mfe(&m0, cost.as_ref(), n, 9, &search()).unwrap();
        let b = epsilon_nash_from_mfe(&m0, cost.as_ref(), n, 9, &search()).unwrap();
        assert_eq!(a.epsilon.to_bits(), b.epsilon.to_bits());
        assert_eq!(a.per_player.len(), n);
        assert!(a.bound_holds(), "{} > {} + {}", a.epsilon, a.sup_bound, a.mfe_slack);
    }
    assert!(epsilon_nash_from_mfe(&m0, cost.as_ref(), 1, 0, &search()).is_err());
}

#[test]
fn best_response_gap_examples() {
    let g = GridSpec::new(-4.0, 4.0, 8001).unwrap();
    let game = symmetrize(build_cost("quad").unwrap(), 4).unwrap();
    for h in [0.0, 0.25, 1.0] {
        let r = best_response_gap(&game, &[h; 4], &g).unwrap();
        assert!((r.max - h * h / 2.0).abs() < 1e-15);
    }
    assert!(best_response_gap(&game, &[0.0; 3], &g).is_err());
}

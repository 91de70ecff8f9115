use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{FinitePlayerGame, MeanFieldCost, Potential};
use crate::error::{invalid, Error, Result};
use crate::measures::{Coupling, DiscreteMeasure, EmpiricalMeasure, Measure, MASS_TOL};
use crate::rng::stream;

fn check_dims(cost: &dyn MeanFieldCost, m: &DiscreteMeasure) -> Result<()> {
    if m.dim() != cost.dim() {
        return Err(Error::DimensionMismatch(format!("{}-d measure for a {}-d cost", m.dim(), cost.dim())));
    }
    Ok(())
}

/// `Γ_LL(m, m') = ∫ [F(x, m) − F(x, m')] (m − m')(dx)`, exact over the atoms.
pub fn gamma_ll(cost: &dyn MeanFieldCost, m: &Measure, m2: &Measure) -> Result<f64> {
    let (a, b) = (m.to_discrete(), m2.to_discrete());
    check_dims(cost, &a)?;
    check_dims(cost, &b)?;
    let d = cost.dim();
    let diff = |x: &[f64]| cost.eval(x, a.view()) - cost.eval(x, b.view());
    let first: f64 = a.points().chunks_exact(d).zip(a.weights()).map(|(x, w)| w * diff(x)).sum();
    let second: f64 = b.points().chunks_exact(d).zip(b.weights()).map(|(x, w)| w * diff(x)).sum();
    Ok(first - second)
}

/// `Γ_DM(π) = ∫ [∇F(x, m) − ∇F(x', m')]·(x − x') π(dx, dx')`.
pub fn gamma_dm(cost: &dyn MeanFieldCost, coupling: &Coupling) -> Result<f64> {
    coupling.check_marginals()?;
    let total: f64 = coupling.mass().iter().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return invalid(format!("coupling has total mass {total}"));
    }
    let (a, b) = (coupling.first(), coupling.second());
    check_dims(cost, a)?;
    let d = cost.dim();
    let grads = |m: &DiscreteMeasure| {
        let mut g = vec![0.0; m.points().len()];
        for (x, o) in m.points().chunks_exact(d).zip(g.chunks_exact_mut(d)) {
            cost.grad_x(x, m.view(), o);
        }
        g
    };
    let (ga, gb) = (grads(a), grads(b));
    let cols = b.len();
    let mut s = 0.0;
    for (k, &w) in coupling.mass().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let (i, j) = (k / cols, k % cols);
        let (x, y) = (a.point(i), b.point(j));
        s += w * (0..d).map(|c| (ga[i * d + c] - gb[j * d + c]) * (x[c] - y[c])).sum::<f64>();
    }
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CouplingFamily {
    Independent,
    Comonotone,
    Antimonotone,
    Permutation,
}

impl CouplingFamily {
    const ALL: [CouplingFamily; 4] =
        [CouplingFamily::Independent, CouplingFamily::Comonotone, CouplingFamily::Antimonotone, CouplingFamily::Permutation];

    pub fn name(self) -> &'static str {
        match self {
            CouplingFamily::Independent => "independent",
            CouplingFamily::Comonotone => "comonotone",
            CouplingFamily::Antimonotone => "antimonotone",
            CouplingFamily::Permutation => "permutation",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ProbeOptions {
    /// `Γ_LL < −ll_tol` counts as a Lasry–Lions violation.
    pub ll_tol: f64,
    /// `Γ_DM − ℓ_F∫|x−x'|²dπ < −dm_tol` counts as a violation of the declared `ℓ_F`.
    pub dm_tol: f64,
    pub max_witnesses: usize,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { ll_tol: 1e-6, dm_tol: 1e-9, max_witnesses: 5 }
    }
}

#[derive(Clone, Debug)]
pub struct Witness {
    pub trial: usize,
    pub family: CouplingFamily,
    pub value: f64,
    pub first: DiscreteMeasure,
    pub second: DiscreteMeasure,
}

/// Outcome of a randomized monotonicity probe. It can refute a declaration,
/// never certify one.
#[derive(Clone, Debug)]
pub struct MonotonicityReport {
    pub trials: usize,
    pub seed: u64,
    pub declared_dm_constant: f64,
    pub min_gamma_ll: f64,
    pub min_gamma_dm: f64,
    /// Minimum of `Γ_DM / ∫|x−x'|²dπ`: the empirical semimonotonicity constant.
    pub min_dm_ratio: f64,
    pub ll_violations: usize,
    pub dm_violations: usize,
    pub ll_witnesses: Vec<Witness>,
    pub dm_witnesses: Vec<Witness>,
}

fn random_cloud(rng: &mut impl Rng, n: usize, d: usize) -> Vec<f64> {
    let center: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let scale = 10f64.powf(rng.gen_range(-1.3..0.4));
    (0..n * d).map(|k| center[k % d] + scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn random_pair(rng: &mut impl Rng, d: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let a = random_cloud(rng, n, d);
    let b = if rng.gen_bool(0.5) {
        random_cloud(rng, n, d)
    } else {
        let eps = 10f64.powf(rng.gen_range(-3.0..0.0));
        a.iter().map(|x| x + eps * rng.sample::<f64, _>(StandardNormal)).collect()
    };
    (a, b)
}

fn random_weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.05..1.0)).collect()
}

/// Samples `trials` measure pairs (2–32 atoms) and couplings cycling through
/// the four families, and reports the minima of `Γ_LL` and `Γ_DM/∫|Δ|²`.
/// Trial `t` draws from its own stream, so the report depends only on
/// `(trials, seed)`.
pub fn probe_monotonicity(
    cost: &dyn MeanFieldCost,
    trials: usize,
    seed: u64,
    opts: &ProbeOptions,
) -> Result<MonotonicityReport> {
    if trials == 0 {
        return invalid("probe needs at least one trial");
    }
    let d = cost.dim();
    let ell = cost.constants().dm_constant;
    let mut rep = MonotonicityReport {
        trials,
        seed,
        declared_dm_constant: ell,
        min_gamma_ll: f64::INFINITY,
        min_gamma_dm: f64::INFINITY,
        min_dm_ratio: f64::INFINITY,
        ll_violations: 0,
        dm_violations: 0,
        ll_witnesses: Vec::new(),
        dm_witnesses: Vec::new(),
    };
    for t in 0..trials {
        let mut rng = stream(seed, t as u64, 0);
        let family = CouplingFamily::ALL[t % 4];
        let n = rng.gen_range(2..=32usize);
        let (pa, pb) = random_pair(&mut rng, d, n);
        let coupling = match family {
            CouplingFamily::Independent => {
                let n2 = rng.gen_range(2..=32usize);
                let pb = if n2 == n { pb } else { random_cloud(&mut rng, n2, d) };
                let (wa, wb) = (random_weights(&mut rng, n), random_weights(&mut rng, n2));
                let a = DiscreteMeasure::from_unnormalized(d, pa, wa)?;
                let b = DiscreteMeasure::from_unnormalized(d, pb, wb)?;
                Coupling::product(&a, &b)?
            }
            CouplingFamily::Comonotone | CouplingFamily::Antimonotone => {
                let a = EmpiricalMeasure::new(d, pa)?.to_discrete();
                let b = EmpiricalMeasure::new(d, pb)?.to_discrete();
                Coupling::monotone(&a, &b, family == CouplingFamily::Antimonotone)?
            }
            CouplingFamily::Permutation => {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                Coupling::from_permutation(&EmpiricalMeasure::new(d, pa)?, &EmpiricalMeasure::new(d, pb)?, &perm)?
            }
        };
        let (a, b) = (coupling.first(), coupling.second());
        let gll = gamma_ll(cost, &a.clone().into(), &b.clone().into())?;
        let gdm = gamma_dm(cost, &coupling)?;
        let c2 = coupling.transport_cost2();
        rep.min_gamma_ll = rep.min_gamma_ll.min(gll);
        rep.min_gamma_dm = rep.min_gamma_dm.min(gdm);
        if c2 > 1e-300 {
            rep.min_dm_ratio = rep.min_dm_ratio.min(gdm / c2);
        }
        let witness = |value| Witness { trial: t, family, value, first: a.clone(), second: b.clone() };
        if gll < -opts.ll_tol {
            rep.ll_violations += 1;
            if rep.ll_witnesses.len() < opts.max_witnesses {
                rep.ll_witnesses.push(witness(gll));
            }
        }
        let margin = gdm - ell * c2;
        if margin < -opts.dm_tol {
            rep.dm_violations += 1;
            if rep.dm_witnesses.len() < opts.max_witnesses {
                rep.dm_witnesses.push(witness(margin));
            }
        }
    }
    Ok(rep)
}

/// Result of [`check_dissipativity`].
#[derive(Clone, Debug)]
pub struct DissipativityCheck {
    pub passed: bool,
    pub samples: usize,
    pub worst_margin: f64,
    pub witness_x: Vec<f64>,
    pub witness_measure: DiscreteMeasure,
}

/// Evaluates `2x·∇F(x,m) − α|x|² − C₁ − C₂(|x|² − |m|₂²)` at random `(x, m)`.
pub fn check_dissipativity(cost: &dyn MeanFieldCost, samples: usize, seed: u64) -> Result<DissipativityCheck> {
    let Some(dc) = cost.constants().dissipativity else {
        return Err(Error::Precondition(format!("{} declares no dissipativity constants", cost.id())));
    };
    if samples == 0 {
        return invalid("dissipativity check needs at least one sample");
    }
    let d = cost.dim();
    let mut worst = f64::INFINITY;
    let mut wit = (vec![0.0; d], DiscreteMeasure::dirac(&vec![0.0; d])?);
    let mut g = vec![0.0; d];
    for s in 0..samples {
        let mut rng = stream(seed, s as u64, 1);
        let scale = 10f64.powf(rng.gen_range(-2.0..1.0));
        let x: Vec<f64> = (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let k = rng.gen_range(1..=8usize);
        let pts: Vec<f64> = random_cloud(&mut rng, k, d).into_iter().map(|v| v * 2.0).collect();
        let m = DiscreteMeasure::from_unnormalized(d, pts, random_weights(&mut rng, k))?;
        cost.grad_x(&x, m.view(), &mut g);
        let x2: f64 = x.iter().map(|v| v * v).sum();
        let m2 = m.view().abs_moment(2.0);
        let lhs: f64 = 2.0 * x.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        let margin = lhs - dc.alpha * x2 - dc.c1 - dc.c2 * (x2 - m2);
        if margin < worst {
            worst = margin;
            wit = (x, m);
        }
    }
    Ok(DissipativityCheck {
        passed: worst >= -1e-9,
        samples,
        worst_margin: worst,
        witness_x: wit.0,
        witness_measure: wit.1,
    })
}

/// Central difference step and the relative error used by the gradient checks:
/// `|fd − analytic| / (1 + |analytic|)`.
fn fd_error(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], grad: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    let mut y = x.to_vec();
    for k in 0..x.len() {
        let h = 1e-5 * (1.0 + x[k].abs());
        y[k] = x[k] + h;
        let fp = f(&y);
        y[k] = x[k] - h;
        let fm = f(&y);
        y[k] = x[k];
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - grad[k]).abs() / (1.0 + grad[k].abs()));
    }
    worst
}

/// Worst finite-difference error of `grad_x` over random `(x, m)`.
pub fn check_cost_gradient(cost: &dyn MeanFieldCost, samples: usize, seed: u64) -> Result<f64> {
    let d = cost.dim();
    let mut worst: f64 = 0.0;
    let mut g = vec![0.0; d];
    for s in 0..samples {
        let mut rng = stream(seed, s as u64, 2);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let k = rng.gen_range(1..=8usize);
        let m = DiscreteMeasure::from_unnormalized(d, random_cloud(&mut rng, k, d), random_weights(&mut rng, k))?;
        cost.grad_x(&x, m.view(), &mut g);
        worst = worst.max(fd_error(&mut |y| cost.eval(y, m.view()), &x, &g));
    }
    Ok(worst)
}

pub fn check_potential_gradient(pot: &dyn Potential, samples: usize, seed: u64) -> Result<f64> {
    let d = pot.dim();
    let mut worst: f64 = 0.0;
    let mut g = vec![0.0; d];
    for s in 0..samples {
        let mut rng = stream(seed, s as u64, 3);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        pot.grad(&x, &mut g);
        worst = worst.max(fd_error(&mut |y| pot.eval(y), &x, &g));
    }
    Ok(worst)
}

/// Worst finite-difference error of `∇_{x_i}F_i` in the `i`-th block.
pub fn check_player_gradients(game: &FinitePlayerGame, samples: usize, seed: u64) -> Result<f64> {
    let (n, d) = (game.n_players(), game.dim());
    let mut worst: f64 = 0.0;
    let mut g = vec![0.0; d];
    for s in 0..samples {
        let mut rng = stream(seed, s as u64, 4);
        let p: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        for i in 0..n {
            game.grad(i, &p, &mut g);
            let xi = p[i * d..(i + 1) * d].to_vec();
            worst = worst.max(fd_error(&mut |y| game.cost_with_deviation(i, &p, y), &xi, &g));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{AntiConvolution, Lq};

    fn dirac(x: f64) -> DiscreteMeasure {
        DiscreteMeasure::dirac(&[x]).unwrap()
    }

    #[test]
    fn gamma_ll_identical_is_zero() {
        let m = DiscreteMeasure::new(1, vec![0.0, 1.0, 3.0], vec![0.2, 0.3, 0.5]).unwrap();
        let c = Lq::new(1, 1.0, 0.5);
        assert_eq!(gamma_ll(&c, &m.clone().into(), &m.into()).unwrap(), 0.0);
    }

    #[test]
    fn gamma_dm_two_diracs() {
        for b in [-0.5, 0.0, 0.5, 2.0] {
            let c = Lq::new(1, 1.0, b);
            let pi = Coupling::product(&dirac(0.0), &dirac(1.0)).unwrap();
            assert!((gamma_dm(&c, &pi).unwrap() - (1.0 + b)).abs() < 1e-15);
        }
    }

    #[test]
    fn gamma_dm_diagonal_and_bad_marginals() {
        let m = DiscreteMeasure::new(1, vec![-1.0, 0.5, 2.0], vec![0.25, 0.25, 0.5]).unwrap();
        let c = AntiConvolution::new(1.0, 0.5).unwrap();
        assert!(gamma_dm(&c, &Coupling::diagonal(&m)).unwrap().abs() < 1e-14);
        let bad = Coupling::new_unchecked(dirac(0.0), dirac(1.0), vec![0.9]).unwrap();
        assert!(gamma_dm(&c, &bad).is_err());
    }

    #[test]
    fn dissipativity_examples() {
        use crate::game::Dissipativity;
        let ok = Lq::new(1, 2.0, 0.0).with_dissipativity(Some(Dissipativity { alpha: 2.0, c1: 0.0, c2: 0.0 }));
        let r = check_dissipativity(&ok, 1000, 1).unwrap();
        assert!(r.passed && r.worst_margin >= 0.0);
        let bad = Lq::new(1, 1.0, 0.0).with_dissipativity(Some(Dissipativity { alpha: 2.0, c1: 1.0, c2: 0.0 }));
        let r = check_dissipativity(&bad, 1000, 1).unwrap();
        assert!(!r.passed && r.worst_margin < 0.0);
        let none = Lq::new(1, 0.5, 1.0);
        assert!(matches!(check_dissipativity(&none, 10, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn probe_is_deterministic() {
        let c = Lq::new(1, 1.0, 0.5);
        let a = probe_monotonicity(&c, 200, 9, &ProbeOptions::default()).unwrap();
        let b = probe_monotonicity(&c, 200, 9, &ProbeOptions::default()).unwrap();
        assert_eq!(a.min_dm_ratio.to_bits(), b.min_dm_ratio.to_bits());
        assert_eq!(a.min_gamma_ll.to_bits(), b.min_gamma_ll.to_bits());
    }
}

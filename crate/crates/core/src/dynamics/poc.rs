use rayon::prelude::*;

use super::engine::{add_confinement, euler_step, interacting_drift, DriftPath};
use super::{check_blow_up, InitialLaw, SdeConfig, StatSeries};
use crate::error::{invalid, Error, Result};
use crate::game::GameInstance;
use crate::measures::AtomView;
use crate::rng::{derive_seed, NoiseStreams};

const PROXY_LABEL: u64 = 0x5052_4f58_59;

/// Law used for the interaction term of the mean-field particles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeanFieldReference {
    /// Closed-form Gaussian flow of the linear-quadratic game.
    ExactLq,
    /// An independent `M`-particle system with its own noise.
    Proxy { m: usize },
}

#[derive(Clone, Debug)]
pub struct PocResult {
    pub n: usize,
    /// `N · mean_i |X^{i,N}_t − X^i_t|²` per replica.
    pub per_replica: Vec<StatSeries>,
    pub mean: StatSeries,
}

fn lq_rates(inst: &GameInstance) -> Result<(f64, f64, f64)> {
    let (a, b) = inst
        .cost
        .lq_coefficients()
        .ok_or_else(|| Error::Precondition(format!("{} is not the linear-quadratic game", inst.cost.id())))?;
    let k = inst
        .potential
        .quadratic_stiffness()
        .ok_or_else(|| Error::Precondition(format!("potential {} is not quadratic", inst.potential.id())))?;
    Ok((a, b, k))
}

/// Mean and per-coordinate variance at time `t` of the McKean–Vlasov law of
/// the LQ game started from a Gaussian: `m' = −(a + b + σk)m`,
/// `v' = −2(a + σk)v + 2σ`.
pub fn mean_field_flow_lq(inst: &GameInstance, mean0: f64, var0: f64, t: f64) -> Result<(f64, f64)> {
    let (a, b, k) = lq_rates(inst)?;
    if !(t >= 0.0 && var0 >= 0.0) {
        return invalid("need t >= 0 and a non-negative initial variance");
    }
    let s = inst.sigma;
    let mean = mean0 * (-(a + b + s * k) * t).exp();
    let r = a + s * k;
    let var = if r.abs() < 1e-300 {
        var0 + 2.0 * s * t
    } else {
        let v_inf = s / r;
        v_inf + (var0 - v_inf) * (-2.0 * r * t).exp()
    };
    Ok((mean, var))
}

fn run_replica(
    inst: &GameInstance,
    n: usize,
    law: &InitialLaw,
    offset: f64,
    cfg: &SdeConfig,
    steps: usize,
    reference: MeanFieldReference,
    r: usize,
) -> Result<StatSeries> {
    let d = inst.dim();
    let cost = inst.cost.as_ref();
    let start = law.sample(n, d, cfg.seed, r as u64)?;
    let mut mf = start.positions.clone();
    let mut xn: Vec<f64> = mf.iter().map(|v| v + offset).collect();
    let mut noise = NoiseStreams::new(cfg.seed, r as u64, n);
    let (mut proxy, mut proxy_noise) = match reference {
        MeanFieldReference::Proxy { m } => {
            let ps = derive_seed(cfg.seed, PROXY_LABEL);
            (Some(law.sample(m, d, ps, r as u64)?.positions), Some(NoiseStreams::new(ps, r as u64, m)))
        }
        MeanFieldReference::ExactLq => (None, None),
    };
    let (mut bn, mut bm) = (vec![0.0; n * d], vec![0.0; n * d]);
    let mut xi = vec![0.0; n * d];
    let mut proxy_drift = proxy.as_ref().map(|p| vec![0.0; p.len()]);
    let mut proxy_xi = proxy.as_ref().map(|p| vec![0.0; p.len()]);
    let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut s = StatSeries::empty("poc_gap");
    s.push(0.0, gap(&xn, &mf));
    let (a, b, k) = match reference {
        MeanFieldReference::ExactLq => lq_rates(inst)?,
        _ => (0.0, 0.0, 0.0),
    };
    let mean_rate = a + b + inst.sigma * k;
    for step in 1..=steps {
        let t = (step - 1) as f64 * cfg.dt;
        // Euler-discrete mean of the exact flow: m_k = m_0 (1 − rate·dt)^k
        let mean_k = law.mean * (1.0 - mean_rate * cfg.dt).powi(step as i32 - 1);
        interacting_drift(inst, &xn, DriftPath::Auto, &mut bn);
        // mean-field particles feel the reference law
        match (&proxy, cost.linear_statistics()) {
            (None, Some(ls)) => {
                let stat = vec![mean_k; ls.len()];
                for (x, o) in mf.chunks_exact(d).zip(bm.chunks_exact_mut(d)) {
                    ls.grad_stat(x, &stat, o);
                }
            }
            (None, None) => unreachable!("exact reference requires the LQ game"),
            (Some(p), Some(ls)) => {
                let stat = ls.average(AtomView::uniform(d, p));
                for (x, o) in mf.chunks_exact(d).zip(bm.chunks_exact_mut(d)) {
                    ls.grad_stat(x, &stat, o);
                }
            }
            (Some(p), None) => {
                let v = AtomView::uniform(d, p);
                bm.par_chunks_mut(d).zip(mf.par_chunks(d)).with_min_len(64).for_each(|(o, x)| cost.grad_x(x, v, o));
            }
        }
        add_confinement(inst, &mf, &mut bm);
        noise.fill(d, &mut xi);
        euler_step(&mut xn, &bn, Some(&xi), cfg.dt, inst.sigma);
        euler_step(&mut mf, &bm, Some(&xi), cfg.dt, inst.sigma);
        if let (Some(p), Some(pn), Some(pd), Some(px)) =
            (proxy.as_mut(), proxy_noise.as_mut(), proxy_drift.as_mut(), proxy_xi.as_mut())
        {
            interacting_drift(inst, p, DriftPath::Auto, pd);
            pn.fill(d, px);
            euler_step(p, pd, Some(px), cfg.dt, inst.sigma);
            check_blow_up(p, d, step, t + cfg.dt)?;
        }
        let tn = step as f64 * cfg.dt;
        check_blow_up(&xn, d, step, tn)?;
        check_blow_up(&mf, d, step, tn)?;
        if cfg.records(step, steps) {
            s.push(tn, gap(&xn, &mf));
        }
    }
    Ok(s)
}

/// Synchronous coupling of the `N`-particle system with `N` independent
/// mean-field particles, both started from the same i.i.d. sample of `law`
/// (plus `offset` on the particle system) and driven by the same Brownian
/// increments. Records `N·mean_i|X^{i,N}_t − X^i_t|²`, which for `N = 1` is
/// the plain gap.
pub fn simulate_poc_coupling(
    inst: &GameInstance,
    n: usize,
    law: &InitialLaw,
    offset: f64,
    cfg: &SdeConfig,
    reference: MeanFieldReference,
) -> Result<PocResult> {
    let steps = cfg.validate()?;
    if n == 0 {
        return invalid("need at least one particle");
    }
    match reference {
        MeanFieldReference::ExactLq => {
            lq_rates(inst)?;
        }
        MeanFieldReference::Proxy { m } => {
            if m < 8 * n {
                return invalid(format!("proxy reference needs M >= 8N = {}, got {m}", 8 * n));
            }
        }
    }
    let per_replica: Vec<StatSeries> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| run_replica(inst, n, law, offset, cfg, steps, reference, r))
        .collect::<Result<_>>()?;
    // per-particle sums were recorded; scale to N · mean = sum
    let mean = StatSeries::average("poc_gap", &per_replica)?;
    Ok(PocResult { n, per_replica, mean })
}

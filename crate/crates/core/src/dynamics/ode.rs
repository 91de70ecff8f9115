use super::check_blow_up;
use crate::error::{invalid, Error, Result};
use crate::game::FinitePlayerGame;

/// A recorded deterministic trajectory `u_{t_k}` in `(R^d)^N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return invalid("trajectory needs matching, non-empty times and states");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("trajectory times must be strictly increasing");
        }
        let len = states[0].len();
        if states.iter().any(|s| s.len() != len) {
            return invalid("trajectory states must share their shape");
        }
        Ok(Self { times, states })
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("non-empty")
    }

    fn value_at(&self, t: f64) -> Vec<f64> {
        let k = self.times.partition_point(|s| *s < t);
        if k == 0 {
            return self.states[0].clone();
        }
        if k == self.times.len() {
            return self.last().to_vec();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        self.states[k - 1].iter().zip(&self.states[k]).map(|(a, b)| a + w * (b - a)).collect()
    }
}

/// Explicit Euler for `du^i = −∇_{x_i}F_i(u) dt`, recording every step.
pub fn ode_gradient_flow(game: &FinitePlayerGame, x0: &[f64], dt: f64, t_end: f64) -> Result<Trajectory> {
    let (n, d) = (game.n_players(), game.dim());
    if x0.len() != n * d {
        return Err(Error::DimensionMismatch(format!("profile of length {} for {n} players in {d}-d", x0.len())));
    }
    if !(dt > 0.0 && t_end >= dt) {
        return invalid("need 0 < dt <= t_end");
    }
    if dt * game.lipschitz_bound() >= 1.0 {
        return Err(Error::Precondition(format!(
            "dt * L = {} >= 1 for declared Lipschitz bound L = {}",
            dt * game.lipschitz_bound(),
            game.lipschitz_bound()
        )));
    }
    let steps = (t_end / dt).round() as usize;
    if (steps as f64 * dt - t_end).abs() > 1e-9 * t_end {
        return invalid(format!("t_end = {t_end} is not an integer multiple of dt = {dt}"));
    }
    let mut u = x0.to_vec();
    let mut g = vec![0.0; n * d];
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(u.clone());
    for k in 1..=steps {
        // gradients from the same state for every player (Jacobi sweep)
        for i in 0..n {
            game.grad(i, &u, &mut g[i * d..(i + 1) * d]);
        }
        for (v, gi) in u.iter_mut().zip(&g) {
            *v -= dt * gi;
        }
        let t = k as f64 * dt;
        check_blow_up(&u, d, k, t)?;
        times.push(t);
        states.push(u.clone());
    }
    Trajectory::new(times, states)
}

/// `(1/t)∫₀ᵗ u_s ds` by the trapezoidal rule over the recorded steps.
pub fn cesaro_average(traj: &Trajectory, t: f64) -> Result<Vec<f64>> {
    cesaro_window(traj, traj.times[0], t)
}

/// `(1/(t₁ − t₀))∫_{t₀}^{t₁} u_s ds`.
pub fn cesaro_window(traj: &Trajectory, t0: f64, t1: f64) -> Result<Vec<f64>> {
    let (lo, hi) = (traj.times[0], *traj.times.last().expect("non-empty"));
    if !(t0 >= lo && t1 <= hi + 1e-12 * hi.abs().max(1.0) && t1 > t0) {
        return invalid(format!("averaging window [{t0}, {t1}] outside the trajectory span [{lo}, {hi}]"));
    }
    let t1 = t1.min(hi);
    let mut knots: Vec<(f64, Vec<f64>)> = vec![(t0, traj.value_at(t0))];
    for (t, s) in traj.times.iter().zip(&traj.states) {
        if *t > t0 && *t < t1 {
            knots.push((*t, s.clone()));
        }
    }
    knots.push((t1, traj.value_at(t1)));
    let mut acc = vec![0.0; traj.states[0].len()];
    for w in knots.windows(2) {
        let h = w[1].0 - w[0].0;
        for ((a, p), q) in acc.iter_mut().zip(&w[0].1).zip(&w[1].1) {
            *a += 0.5 * h * (p + q);
        }
    }
    acc.iter_mut().for_each(|a| *a /= t1 - t0);
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(f: impl Fn(f64) -> f64, dt: f64, t: f64) -> Trajectory {
        let k = (t / dt).round() as usize;
        let times: Vec<f64> = (0..=k).map(|j| j as f64 * dt).collect();
        let states = times.iter().map(|s| vec![f(*s)]).collect();
        Trajectory::new(times, states).unwrap()
    }

    #[test]
    fn cesaro_examples() {
        assert!((cesaro_average(&ramp(|_| 3.0, 0.1, 1.0), 1.0).unwrap()[0] - 3.0).abs() < 1e-14);
        assert!((cesaro_average(&ramp(|s| s, 0.01, 2.0), 2.0).unwrap()[0] - 1.0).abs() < 1e-12);
        let e = cesaro_average(&ramp(|s| (-s).exp(), 1e-3, 1.0), 1.0).unwrap()[0];
        assert!((e - (1.0 - (-1.0f64).exp())).abs() < 1e-6);
        // partial last interval is interpolated
        assert!((cesaro_average(&ramp(|s| s, 0.1, 2.0), 1.05).unwrap()[0] - 0.525).abs() < 1e-12);
        assert!(cesaro_average(&ramp(|s| s, 0.1, 1.0), 2.0).is_err());
    }

    #[test]
    fn single_player_decay() {
        let g = FinitePlayerGame::new("half_square", 1, 1, 1.0, |_, x| 0.5 * x[0] * x[0], |_, x, o| o[0] = x[0]).unwrap();
        for dt in [1e-2, 5e-3] {
            let tr = ode_gradient_flow(&g, &[1.0], dt, 1.0).unwrap();
            let err = (tr.last()[0] - (-1.0f64).exp()).abs();
            assert!(err < dt, "dt {dt}: {err}");
        }
        assert!(ode_gradient_flow(&g, &[1.0], 1.0, 2.0).is_err());
    }
}

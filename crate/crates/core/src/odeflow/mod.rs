//! Fluid limit and Hamilton's equations, integrated with fixed-step RK4.
//!
//! Each empty-degree class `e_i` is frozen at 0 once it is exhausted, and
//! the run stops when the total empty mass vanishes (time `T*`, or `T_{α₀}`
//! on a tilted path). States after that are `(T*, 0, .., 0)`.

mod integrator;

use serde::{Deserialize, Serialize};

pub use integrator::{EVENT_RESOLUTION, EXTINCTION_MASS};
use integrator::Problem;

use crate::error::{Error, Result};
use crate::hamiltonian;
use crate::model::{in_state_space, initial_macrostate, Covector, DegreeDistribution, MacroState};

pub const DEFAULT_STEP: f64 = 1e-4;
/// Slack allowed when checking that a Hamilton path stays in the state space.
pub const STATE_SPACE_SLACK: f64 = 1e-6;
const HORIZON: f64 = 1.0;
/// On a tilted path an empty class can vanish on its own while its adjoint
/// diverges like `ln e_j`; steps there shrink to this fraction of the time the
/// class has left.
const CLASS_LAYER: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MacroState>,
    /// Extinction time `t_i` of each degree class (`+∞` if not reached).
    pub stop_times: Vec<f64>,
    /// Global extinction time, or 1 if the empties survive the horizon.
    pub t_star: f64,
    /// Whether extinction happened within `[0, 1]`.
    pub reached: bool,
}

impl Trajectory {
    /// State at time `t`, linear between grid points and `(T*, 0, .., 0)` past `T*`.
    pub fn state_at(&self, t: f64) -> MacroState {
        let last = self.states.last().expect("trajectory has a start");
        if self.reached && t > self.t_star {
            return MacroState::new(self.t_star, 0.0, vec![0.0; last.e.len()]);
        }
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            return self.states[0].clone();
        }
        if i == self.times.len() {
            return last.clone();
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        let (a, b) = (self.states[i - 1].flat(), self.states[i].flat());
        MacroState::from_flat(&a.iter().zip(&b).map(|(p, q)| p + w * (q - p)).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonSolution {
    pub trajectory: Trajectory,
    /// `α(t)` on the same grid as the trajectory.
    pub adjoint: Vec<Covector>,
    pub alpha0: Covector,
    /// `F(α₀) = ∫_0^{T_{α₀}} L(x, ẋ) dt`.
    pub action: f64,
    pub t_alpha0: f64,
    pub reached: bool,
}

fn check_step(step: f64) -> Result<()> {
    if !(step > 0.0 && step <= 0.01) {
        return Err(Error::invalid(format!("integrator step must lie in (0, 0.01], got {step}")));
    }
    Ok(())
}

fn trajectory(sol: &integrator::Solution, state: impl Fn(f64, &[f64]) -> MacroState) -> Trajectory {
    Trajectory {
        times: sol.times.clone(),
        states: sol.times.iter().zip(&sol.states).map(|(&t, y)| state(t, y)).collect(),
        stop_times: sol.stop_times.clone(),
        t_star: sol.extinction.unwrap_or(HORIZON),
        reached: sol.extinction.is_some(),
    }
}

/// Solve `ṡ = 1`, `u̇ = -2 Σ k e_k / Σ e_k`, `ė_i = (-e_i - (i e_i / u) Σ k e_k) / Σ e_k`
/// from `(0, λ, p)`.
pub fn fluid_limit(dist: &DegreeDistribution, step: f64) -> Result<Trajectory> {
    check_step(step)?;
    let x0 = initial_macrostate(dist);
    let classes = x0.e.len();
    let rhs = |_t: f64, y: &[f64], alive: &[bool], dy: &mut [f64]| {
        let e = &y[2..];
        let mass: f64 = e.iter().zip(alive).filter(|(_, &a)| a).map(|(v, _)| v).sum();
        let half: f64 = (0..classes).filter(|&k| alive[k]).map(|k| k as f64 * e[k]).sum();
        dy[0] = 1.0;
        dy[1] = -2.0 * half / mass;
        for i in 0..classes {
            dy[2 + i] = if !alive[i] {
                0.0
            } else if half == 0.0 {
                -e[i] / mass
            } else {
                (-e[i] - i as f64 * e[i] / y[1] * half) / mass
            };
        }
        Ok(())
    };
    let problem = Problem { rhs: &rhs, masses: (2..2 + classes).collect(), step, horizon: HORIZON, class_layer: None };
    let sol = problem.integrate(x0.flat(), &|_, _| Ok(()))?;
    Ok(trajectory(&sol, |_, y| MacroState::from_flat(y)))
}

/// Solve `ẋ = H_α(x, α)`, `α̇ = -H_x(x, α)` from `(x(0), α(0)) = ((0, λ, p), α₀)`.
///
/// The action accumulates `⟨α, H_α⟩ - H`, which equals `L(x, ẋ)` along the flow.
pub fn hamilton_path(dist: &DegreeDistribution, alpha0: &Covector, step: f64) -> Result<HamiltonSolution> {
    check_step(step)?;
    let x0 = initial_macrostate(dist);
    if alpha0.e.len() != x0.e.len() {
        return Err(Error::invalid(format!(
            "distribution has {} degree classes, α₀ has {}",
            x0.e.len(),
            alpha0.e.len()
        )));
    }
    if !alpha0.is_finite() {
        return Err(Error::invalid("α₀ must be finite"));
    }
    let n = x0.dim();
    let classes = x0.e.len();
    let rhs = |t: f64, y: &[f64], alive: &[bool], dy: &mut [f64]| {
        let x = MacroState::from_flat(&y[..n]);
        let a = Covector::from_flat(&y[n..2 * n]);
        let h = hamiltonian::evaluate(&x, &a).map_err(|e| match e {
            Error::Domain { base } => Error::LeftStateSpace { t, detail: format!("hit factor g = {base:e}") },
            e => e,
        })?;
        let v = h.grad_alpha.flat();
        let gx = h.grad_x.flat();
        for i in 0..n {
            dy[i] = v[i];
            dy[n + i] = -gx[i];
        }
        for j in 0..classes {
            if !alive[j] {
                dy[2 + j] = 0.0;
                dy[n + 2 + j] = 0.0;
            }
        }
        dy[2 * n] = a.dot(&v) - h.value;
        Ok(())
    };
    let lambda = dist.mean_degree();
    let check = |t: f64, y: &[f64]| {
        let x = MacroState::from_flat(&y[..n]);
        if in_state_space(&x, lambda, STATE_SPACE_SLACK) {
            Ok(())
        } else {
            Err(Error::LeftStateSpace { t, detail: format!("state {:?}", x.flat()) })
        }
    };
    let mut y0 = x0.flat();
    y0.extend(alpha0.flat());
    y0.push(0.0);
    let problem = Problem { rhs: &rhs, masses: (2..2 + classes).collect(), step, horizon: HORIZON, class_layer: Some(CLASS_LAYER) };
    let sol = problem.integrate(y0, &check)?;
    let trajectory = trajectory(&sol, |_, y| MacroState::from_flat(&y[..n]));
    Ok(HamiltonSolution {
        adjoint: sol.states.iter().map(|y| Covector::from_flat(&y[n..2 * n])).collect(),
        alpha0: alpha0.clone(),
        action: sol.states.last().expect("start state")[2 * n],
        t_alpha0: trajectory.t_star,
        reached: trajectory.reached,
        trajectory,
    })
}

/// Hamilton's equations for a `d`-regular graph, reduced to the empties `x`
/// and their adjoint `y = α_e` with `u(t) = d(1 - 2t)`:
///
/// ```text
/// ẋ = -1 + d x / (e^y (2t - 1 + x) - x)
/// ẏ = d (1 - e^y) / (e^y (2t - 1 + x) - x)
/// ```
///
/// from `x(0) = 1`, `y(0) = α₀`. The action integrand is
/// `L̂ = (ẋ + 1) y - d log(1 - p + p e^{-y})` with `p = x / (1 - 2t)`.
pub fn hamilton_path_regular(d: usize, alpha0: f64, step: f64) -> Result<HamiltonSolution> {
    check_step(step)?;
    if d < 2 {
        return Err(Error::invalid(format!("degree must be at least 2, got {d}")));
    }
    if !alpha0.is_finite() {
        return Err(Error::invalid("α₀ must be finite"));
    }
    let df = d as f64;
    let rhs = |t: f64, y: &[f64], alive: &[bool], dy: &mut [f64]| {
        let (x, adj) = (y[0], y[1]);
        let growth = adj.exp();
        let den = growth * (2.0 * t - 1.0 + x) - x;
        if !(den.abs() >= 1e-14) {
            return Err(Error::Singularity { t, detail: format!("denominator {den:e} at x = {x}, y = {adj}") });
        }
        let xdot = -1.0 + df * x / den;
        dy[0] = if alive[0] { xdot } else { 0.0 };
        dy[1] = df * (1.0 - growth) / den;
        let p = x.max(0.0) / (1.0 - 2.0 * t);
        dy[2] = (xdot + 1.0) * adj - df * (1.0 - p + p * (-adj).exp()).ln();
        if dy.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singularity { t, detail: format!("non-finite derivative at x = {x}, y = {adj}") });
        }
        Ok(())
    };
    let check = |t: f64, y: &[f64]| {
        if y[0] >= -STATE_SPACE_SLACK && y[0] <= 1.0 - 2.0 * t + STATE_SPACE_SLACK {
            Ok(())
        } else {
            Err(Error::LeftStateSpace { t, detail: format!("empties {} exceed u/d = {}", y[0], 1.0 - 2.0 * t) })
        }
    };
    let problem = Problem { rhs: &rhs, masses: vec![0], step, horizon: HORIZON, class_layer: None };
    let sol = problem.integrate(vec![1.0, alpha0, 0.0], &check)?;
    let embed = |v: f64| {
        let mut e = vec![0.0; d + 1];
        e[d] = v;
        e
    };
    let trajectory = trajectory(&sol, |t, y| MacroState::new(t, df * (1.0 - 2.0 * t), embed(y[0])));
    Ok(HamiltonSolution {
        adjoint: sol.states.iter().map(|y| Covector::new(0.0, 0.0, embed(y[1]))).collect(),
        alpha0: Covector::new(0.0, 0.0, embed(alpha0)),
        action: sol.states.last().expect("start state")[2],
        t_alpha0: trajectory.t_star,
        reached: trajectory.reached,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regular_fluid(d: usize, t: f64) -> f64 {
        let r = 1.0 - 2.0 * t;
        if d == 2 {
            r * (0.5 * r.ln() + 1.0)
        } else {
            let df = d as f64;
            (2.0 * t - 1.0 + (df - 1.0) * r.powf(df / 2.0)) / (df - 2.0)
        }
    }

    fn jamming(d: usize) -> f64 {
        if d == 2 {
            (1.0 - (-2.0f64).exp()) / 2.0
        } else {
            let df = d as f64;
            0.5 * (1.0 - (1.0 / (df - 1.0)).powf(2.0 / (df - 2.0)))
        }
    }

    fn at(tr: &Trajectory, t: f64) -> &MacroState {
        let i = tr.times.iter().position(|&s| (s - t).abs() < 1e-12).expect("grid point");
        &tr.states[i]
    }

    #[test]
    fn regular_fluid_matches_closed_form() {
        for d in [2, 3] {
            let tr = fluid_limit(&DegreeDistribution::regular(d).unwrap(), DEFAULT_STEP).unwrap();
            for t in [0.1, 0.2, 0.3] {
                assert!((at(&tr, t).e[d] - regular_fluid(d, t)).abs() < 1e-8, "d = {d}, t = {t}");
            }
            assert!(tr.reached);
            assert!((tr.t_star - jamming(d)).abs() < 1e-8, "{} vs {}", tr.t_star, jamming(d));
        }
    }

    #[test]
    fn isolated_vertices() {
        let tr = fluid_limit(&DegreeDistribution::new(vec![1.0]).unwrap(), DEFAULT_STEP).unwrap();
        assert!((tr.t_star - 1.0).abs() < 1e-9);
        let x = at(&tr, 0.4);
        assert!((x.s - 0.4).abs() < 1e-12 && (x.e[0] - 0.6).abs() < 1e-12 && x.u == 0.0);
    }

    #[test]
    fn fourth_order_convergence() {
        let dist = DegreeDistribution::regular(3).unwrap();
        let err = |h: f64| (at(&fluid_limit(&dist, h).unwrap(), 0.3).e[3] - regular_fluid(3, 0.3)).abs();
        assert!(err(0.01) / err(0.005) >= 8.0);
    }

    #[test]
    fn step_out_of_range() {
        let dist = DegreeDistribution::regular(3).unwrap();
        assert!(matches!(fluid_limit(&dist, 0.02), Err(Error::InvalidInput(_))));
        assert!(fluid_limit(&dist, 0.0).is_err());
    }

    #[test]
    fn frozen_classes_stay_zero() {
        let dist = DegreeDistribution::new(vec![0.2, 0.3, 0.0, 0.5]).unwrap();
        let tr = fluid_limit(&dist, 1e-3).unwrap();
        assert_eq!(tr.stop_times[2], 0.0);
        assert!(tr.states.iter().all(|x| x.e[2] == 0.0));
        for w in tr.states.windows(2) {
            assert!(w[1].s > w[0].s && w[1].u <= w[0].u + 1e-15);
            assert!(w[0].e.iter().zip(&w[1].e).all(|(a, b)| b <= &(a + 1e-15)));
        }
        assert!(tr.stop_times.iter().all(|&t| t <= tr.t_star));
        let past = tr.state_at(tr.t_star + 0.01);
        assert_eq!(past.flat(), MacroState::new(tr.t_star, 0.0, vec![0.0; 4]).flat());
    }

    /// State pairs at the times both trajectories visit.
    fn common<'a>(a: &'a Trajectory, b: &'a Trajectory) -> Vec<(&'a MacroState, &'a MacroState)> {
        let pairs: Vec<_> = a
            .times
            .iter()
            .zip(&a.states)
            .filter_map(|(&t, x)| b.times.iter().position(|&s| s == t).map(|j| (x, &b.states[j])))
            .collect();
        assert!(pairs.len() > a.times.len() / 2);
        pairs
    }

    #[test]
    fn zero_tilt_is_the_fluid_limit() {
        let dist = DegreeDistribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let fluid = fluid_limit(&dist, DEFAULT_STEP).unwrap();
        let sol = hamilton_path(&dist, &Covector::zeros(3), DEFAULT_STEP).unwrap();
        assert!(sol.action.abs() < 1e-8);
        assert!((sol.t_alpha0 - fluid.t_star).abs() < 1e-8);
        for (a, b) in common(&sol.trajectory, &fluid) {
            let diff = a.flat().iter().zip(b.flat()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-8);
        }
        assert!(sol.adjoint.iter().all(|a| a.flat().iter().all(|v| v.abs() < 1e-8)));
    }

    #[test]
    fn reduced_zero_tilt() {
        let sol = hamilton_path_regular(3, 0.0, DEFAULT_STEP).unwrap();
        assert!((sol.t_alpha0 - 0.375).abs() < 1e-6);
        assert!(sol.adjoint.iter().all(|a| a.e[3] == 0.0));
        assert!(sol.action.abs() < 1e-12);
    }

    #[test]
    fn full_and_reduced_systems_agree() {
        for a0 in [-0.7, 0.3] {
            let reduced = hamilton_path_regular(3, a0, DEFAULT_STEP).unwrap();
            let full = hamilton_path(
                &DegreeDistribution::regular(3).unwrap(),
                &Covector::new(0.0, 0.0, vec![0.0, 0.0, 0.0, a0]),
                DEFAULT_STEP,
            )
            .unwrap();
            assert!((reduced.t_alpha0 - full.t_alpha0).abs() < 1e-6);
            assert!((reduced.action - full.action).abs() < 1e-6);
            for (a, b) in common(&reduced.trajectory, &full.trajectory) {
                assert!((a.e[3] - b.e[3]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn hamiltonian_is_conserved() {
        let dist = DegreeDistribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let a0 = Covector::new(0.2, -0.1, vec![0.1, -0.1, 0.05, -0.1]);
        let sol = hamilton_path(&dist, &a0, DEFAULT_STEP).unwrap();
        let tr = &sol.trajectory;
        // H is a first integral until the first class empties; dropping that
        // class from the log-sum-exp then changes its value
        let first = tr.stop_times.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(first < tr.t_star);
        let h0 = hamiltonian::hamiltonian(&tr.states[0], &a0).unwrap();
        let mut seen = 0;
        for ((x, a), &t) in tr.states.iter().zip(&sol.adjoint).zip(&tr.times) {
            if t >= first {
                break;
            }
            let h = hamiltonian::hamiltonian(x, a).unwrap();
            assert!((h - h0).abs() < 1e-8, "{h} vs {h0} at t = {t}");
            seen += 1;
        }
        assert!(seen > 1000);
        assert!(sol.adjoint.iter().all(|a| a.s == a0.s));
        assert!(sol.action > 0.0);
    }

    #[test]
    fn tilt_orders_extinction_times() {
        let grid = [-2.0, -1.0, -0.5, 0.0, 0.2, 0.4];
        let times: Vec<f64> = grid.iter().map(|&a| hamilton_path_regular(3, a, 1e-3).unwrap().t_alpha0).collect();
        assert!(times.windows(2).all(|w| w[0] < w[1]), "{times:?}");
        assert!(times.iter().all(|&t| t > 0.25 && t < 0.5));
    }

    #[test]
    fn large_positive_tilt_runs_out_of_blocked_half_edges() {
        // the extremal reaches u = d e before the empties are exhausted
        for a0 in [0.5, 1.0, 2.0] {
            let err = hamilton_path_regular(3, a0, DEFAULT_STEP).unwrap_err();
            assert!(matches!(err, Error::LeftStateSpace { .. } | Error::Singularity { .. }), "{err:?}");
        }
    }

    #[test]
    fn action_matches_post_hoc_quadrature() {
        let (d, a0) = (3, 0.3);
        let sol = hamilton_path_regular(d, a0, DEFAULT_STEP).unwrap();
        let tr = &sol.trajectory;
        // trapezoid in t of L̂(t, x, ẋ) with ẋ from the ODE right-hand side
        let integrand = |i: usize| {
            let (t, x, y) = (tr.times[i], tr.states[i].e[d], sol.adjoint[i].e[d]);
            let den = y.exp() * (2.0 * t - 1.0 + x) - x;
            let xdot = -1.0 + d as f64 * x / den;
            crate::legendre::cost_e_reduced(d, t, x, xdot).unwrap()
        };
        let last = tr.times.len() - 1;
        let mut quad = 0.0;
        for i in 0..last - 1 {
            quad += 0.5 * (tr.times[i + 1] - tr.times[i]) * (integrand(i) + integrand(i + 1));
        }
        // the final partial step ends on x = 0
        let (t0, t1) = (tr.times[last - 1], tr.times[last]);
        let y1 = sol.adjoint[last].e[d];
        let den = y1.exp() * (2.0 * t1 - 1.0) ;
        let end = (-1.0 + 0.0 / den + 1.0) * y1 - 0.0;
        quad += 0.5 * (t1 - t0) * (integrand(last - 1) + end);
        assert!((quad - sol.action).abs() < 1e-6, "{quad} vs {}", sol.action);
    }
}

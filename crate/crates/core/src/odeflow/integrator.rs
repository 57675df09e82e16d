//! Fixed-step RK4 with freezing events on the empty-mass coordinates.

use crate::error::Result;

/// Empty mass below which the process counts as extinct.
pub const EXTINCTION_MASS: f64 = 1e-10;
/// Width of the bracket left by event bisection on the step length.
pub const EVENT_RESOLUTION: f64 = 1e-13;

/// Right-hand side `f(t, y, alive, dy)`; coordinates tied to dead classes
/// must get `dy = 0`.
pub(crate) type Rhs<'a> = dyn Fn(f64, &[f64], &[bool], &mut [f64]) -> Result<()> + 'a;

pub(crate) struct Problem<'a> {
    pub rhs: &'a Rhs<'a>,
    /// Position in `y` of each empty-mass coordinate `e_0, .., e_D`.
    pub masses: Vec<usize>,
    pub step: f64,
    pub horizon: f64,
    /// Cap each step at this fraction of the linear time to extinction of
    /// every single class. Needed when an adjoint diverges like `ln e_j`.
    pub class_layer: Option<f64>,
}

pub(crate) struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Per-class extinction time, `+∞` if never reached.
    pub stop_times: Vec<f64>,
    pub extinction: Option<f64>,
}

impl Problem<'_> {
    fn rk4(&self, t: f64, y: &[f64], alive: &[bool], h: f64) -> Result<Vec<f64>> {
        let n = y.len();
        let f = self.rhs;
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut tmp = vec![0.0; n];
        f(t, y, alive, &mut k1)?;
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        f(t + 0.5 * h, &tmp, alive, &mut k2)?;
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        f(t + 0.5 * h, &tmp, alive, &mut k3)?;
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        f(t + h, &tmp, alive, &mut k4)?;
        Ok((0..n).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
    }

    fn mass(&self, y: &[f64], alive: &[bool]) -> f64 {
        self.masses.iter().zip(alive).filter(|(_, &a)| a).map(|(&i, _)| y[i]).sum()
    }

    /// A trial step drove some class to zero, or failed (bisection then
    /// localizes the failure).
    fn triggers(&self, trial: &Result<Vec<f64>>, alive: &[bool]) -> bool {
        match trial {
            Err(_) => true,
            Ok(y) => self.masses.iter().zip(alive).any(|(&i, &a)| a && y[i] <= 0.0),
        }
    }

    fn mass_rate(&self, t: f64, y: &[f64], alive: &[bool]) -> Result<(Vec<f64>, f64)> {
        let mut dy = vec![0.0; y.len()];
        (self.rhs)(t, y, alive, &mut dy)?;
        let rate = self.masses.iter().zip(alive).filter(|(_, &a)| a).map(|(&i, _)| dy[i]).sum();
        Ok((dy, rate))
    }

    /// Integrate from `y0` at `t = 0` until extinction or the horizon.
    ///
    /// Near extinction the right-hand side has a 0/0 structure, so steps are
    /// capped at a quarter of the linear time to extinction of every class;
    /// once a mass is below a few times [`EXTINCTION_MASS`] it is frozen, and
    /// the last stretch to total extinction is linear.
    /// `check` sees every accepted state and may reject it.
    pub fn integrate(&self, y0: Vec<f64>, check: &dyn Fn(f64, &[f64]) -> Result<()>) -> Result<Solution> {
        let mut alive: Vec<bool> = self.masses.iter().map(|&i| y0[i] > 0.0).collect();
        let mut stop_times: Vec<f64> = alive.iter().map(|&a| if a { f64::INFINITY } else { 0.0 }).collect();
        let mut y = y0;
        check(0.0, &y)?;
        let mut sol = Solution { times: vec![0.0], states: vec![y.clone()], stop_times: vec![], extinction: None };
        // shortened steps never skip a grid point, so t = k·step is always hit exactly
        let mut k = 0usize;
        let mut t = 0.0;
        while t < self.horizon {
            let m = self.mass(&y, &alive);
            let (dy, rate) = self.mass_rate(t, &y, &alive)?;
            if m < 4.0 * EXTINCTION_MASS {
                let tau = if rate < 0.0 { m / -rate } else { 0.0 };
                for i in 0..y.len() {
                    y[i] += tau * dy[i];
                }
                t += tau;
                for (j, &i) in self.masses.iter().enumerate() {
                    if alive[j] {
                        alive[j] = false;
                        y[i] = 0.0;
                        stop_times[j] = t;
                    }
                }
                sol.times.push(t);
                sol.states.push(y.clone());
                sol.extinction = Some(t);
                break;
            }
            // a single class can also vanish while the others go on
            let mut frozen = false;
            for (j, &i) in self.masses.iter().enumerate() {
                if alive[j] && y[i] < 4.0 * EXTINCTION_MASS {
                    alive[j] = false;
                    stop_times[j] = t;
                    y[i] = 0.0;
                    frozen = true;
                }
            }
            if frozen {
                continue;
            }
            let next = ((k + 1) as f64 * self.step).min(self.horizon);
            let mut h = next - t;
            let cap = self
                .masses
                .iter()
                .zip(&alive)
                .filter(|&(&i, &a)| self.class_layer.is_some() && a && dy[i] < 0.0)
                .map(|(&i, _)| self.class_layer.unwrap_or(0.0) * y[i] / -dy[i])
                .fold(0.25 * m / rate.min(0.0).abs(), f64::min);
            let layer = cap < h;
            if layer {
                h = cap;
            }
            let trial = self.rk4(t, &y, &alive, h);
            if !self.triggers(&trial, &alive) {
                y = trial?;
                if layer {
                    t += h;
                } else {
                    t = next;
                    k += 1;
                }
                check(t, &y)?;
                sol.times.push(t);
                sol.states.push(y.clone());
                continue;
            }
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > EVENT_RESOLUTION {
                let mid = 0.5 * (lo + hi);
                if self.triggers(&self.rk4(t, &y, &alive, mid), &alive) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            // a failure that survives bisection is a genuine singularity
            y = self.rk4(t, &y, &alive, hi)?;
            t += hi;
            for (j, &i) in self.masses.iter().enumerate() {
                if alive[j] && y[i] <= 0.0 {
                    alive[j] = false;
                    y[i] = 0.0;
                    stop_times[j] = t;
                }
            }
            check(t, &y)?;
            sol.times.push(t);
            sol.states.push(y.clone());
            if t >= next {
                t = next;
                k += 1;
            }
        }
        sol.stop_times = stop_times;
        Ok(sol)
    }
}

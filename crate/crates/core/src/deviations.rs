//! Rate-function optimization over sets of trajectories.
//!
//! For a `d`-regular graph the optimal paths form a one-parameter family
//! indexed by the initial adjoint `α₀`, and `T_{α₀}` is increasing in `α₀`.
//! That turns deviations of the stopping time into a scalar root search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Covector, DegreeDistribution};
use crate::odeflow::{self, HamiltonSolution, Trajectory, DEFAULT_STEP};

/// Default bisection bracket for `α₀`.
pub const ALPHA0_BOUND: f64 = 20.0;
/// Target accuracy of `T_{α₀}` in [`alpha0_for_time`].
pub const TIME_TOL: f64 = 1e-8;

/// Limit of `T_N* / N` for a `d`-regular graph.
pub fn jamming_constant(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 0.5,
        2 => (1.0 - (-2.0f64).exp()) / 2.0,
        _ => {
            let df = d as f64;
            0.5 * (1.0 - (1.0 / (df - 1.0)).powf(2.0 / (df - 2.0)))
        }
    }
}

/// `F(α₀)` and `T_{α₀}` on a grid of scalar tilts. Failed grid points carry
/// `NaN` values and the error message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub degree: usize,
    pub alpha0_grid: Vec<f64>,
    pub f_values: Vec<f64>,
    pub t_values: Vec<f64>,
    pub errors: Vec<Option<String>>,
}

impl RateCurve {
    /// `(α₀, T_{α₀}, F)` for the grid points that integrated cleanly.
    pub fn feasible(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.alpha0_grid.len())
            .filter(|&i| self.errors[i].is_none())
            .map(|i| (self.alpha0_grid[i], self.t_values[i], self.f_values[i]))
    }
}

/// Evenly spaced grid on `[lo, hi]` with `points` nodes.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

pub fn rate_curve_regular(d: usize, range: (f64, f64), points: usize) -> Result<RateCurve> {
    rate_curve_regular_with(d, range, points, DEFAULT_STEP)
}

/// Scan the reduced Hamilton system over `points` values of `α₀` in `range`.
/// Integration failures are recorded per point and do not abort the scan.
pub fn rate_curve_regular_with(d: usize, range: (f64, f64), points: usize, step: f64) -> Result<RateCurve> {
    if points < 2 {
        return Err(Error::invalid(format!("a rate curve needs at least 2 points, got {points}")));
    }
    if !(range.0.is_finite() && range.1.is_finite() && range.0 < range.1) {
        return Err(Error::invalid(format!("bad α₀ range {range:?}")));
    }
    if d < 2 {
        return Err(Error::invalid(format!("degree must be at least 2, got {d}")));
    }
    let grid = linspace(range.0, range.1, points);
    let runs: Vec<Result<HamiltonSolution>> =
        grid.par_iter().map(|&a| odeflow::hamilton_path_regular(d, a, step)).collect();
    let mut curve = RateCurve {
        degree: d,
        alpha0_grid: grid,
        f_values: Vec::with_capacity(points),
        t_values: Vec::with_capacity(points),
        errors: Vec::with_capacity(points),
    };
    for run in runs {
        match run {
            Ok(sol) => {
                curve.f_values.push(sol.action);
                curve.t_values.push(sol.t_alpha0);
                curve.errors.push(None);
            }
            Err(e) => {
                curve.f_values.push(f64::NAN);
                curve.t_values.push(f64::NAN);
                curve.errors.push(Some(e.to_string()));
            }
        }
    }
    Ok(curve)
}

/// Where `T_{α₀}` sits relative to a target. A path that leaves the state
/// space does so because the tilt is too strong in the positive direction.
fn compare_time(d: usize, alpha0: f64, target: f64, step: f64) -> Result<(std::cmp::Ordering, f64)> {
    use std::cmp::Ordering::*;
    match odeflow::hamilton_path_regular(d, alpha0, step) {
        Ok(sol) => Ok((sol.t_alpha0.partial_cmp(&target).unwrap_or(Greater), sol.t_alpha0)),
        Err(Error::LeftStateSpace { .. } | Error::Singularity { .. }) if alpha0 > 0.0 => Ok((Greater, f64::NAN)),
        Err(e) => Err(e),
    }
}

pub fn alpha0_for_time(d: usize, target: f64) -> Result<f64> {
    alpha0_for_time_with(d, target, ALPHA0_BOUND, DEFAULT_STEP)
}

/// The `α₀` whose reduced Hamilton path empties at `target`, by bisection
/// on `[-bound, bound]` until `|T_{α₀} - target| < 1e-8`.
pub fn alpha0_for_time_with(d: usize, target: f64, bound: f64, step: f64) -> Result<f64> {
    use std::cmp::Ordering::*;
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid(format!("target time must lie in (0, 1), got {target}")));
    }
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(Error::invalid(format!("bisection bound must be positive, got {bound}")));
    }
    let (order, t0) = compare_time(d, 0.0, target, step)?;
    if (t0 - target).abs() < TIME_TOL {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = if order == Less { (0.0, bound) } else { (-bound, 0.0) };
    let (end, _) = compare_time(d, if order == Less { hi } else { lo }, target, step)?;
    if end == order {
        return Err(Error::OutOfRange(format!("T = {target} is not reached for |α₀| ≤ {bound} (d = {d})")));
    }
    let mut last = f64::NAN;
    while hi - lo > f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
        let mid = 0.5 * (lo + hi);
        let (o, t) = compare_time(d, mid, target, step)?;
        if (t - target).abs() < TIME_TOL {
            return Ok(mid);
        }
        last = t;
        if o == Less {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::OutOfRange(format!(
        "T_α₀ jumps past {target} near α₀ = {lo} (last T = {last}); the extremals beyond leave the state space"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Upper,
    Lower,
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upper" => Ok(Side::Upper),
            "lower" => Ok(Side::Lower),
            _ => Err(Error::invalid(format!("side must be upper or lower, got {s:?}"))),
        }
    }
}

/// Rate, with its optimal tilt, for `T_N*/N ≥ T* + ε` (upper) or `≤ T* - ε` (lower).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationRate {
    pub degree: usize,
    pub epsilon: f64,
    pub side: Side,
    pub target: f64,
    pub alpha0: f64,
    pub rate: f64,
}

pub fn deviation_rate(d: usize, epsilon: f64, side: Side) -> Result<DeviationRate> {
    deviation_rate_with(d, epsilon, side, DEFAULT_STEP)
}

/// `F(α₀(T* ± ε))`.
pub fn deviation_rate_with(d: usize, epsilon: f64, side: Side, step: f64) -> Result<DeviationRate> {
    if d < 2 {
        return Err(Error::invalid(format!("degree must be at least 2, got {d}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("ε must be positive, got {epsilon}")));
    }
    let t_star = jamming_constant(d);
    let target = match side {
        Side::Upper => t_star + epsilon,
        Side::Lower => t_star - epsilon,
    };
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid(format!("T* ± ε = {target} falls outside (0, 1)")));
    }
    let alpha0 = alpha0_for_time_with(d, target, ALPHA0_BOUND, step)?;
    let rate = odeflow::hamilton_path_regular(d, alpha0, step)?.action;
    Ok(DeviationRate { degree: d, epsilon, side, target, alpha0, rate })
}

/// Minimum of the action over the grid points whose Hamilton path satisfies
/// `predicate`. This relaxes the infimum over `{α₀ : x̂_{α₀} ∈ Ā}` to the
/// grid; closed sets are expressed by non-strict inequalities in the
/// predicate. Grid points whose path cannot be integrated count as outside
/// the set.
pub fn optimize_over_set_general<P>(
    dist: &DegreeDistribution,
    predicate: P,
    grid: &[Covector],
    step: f64,
) -> Result<(Covector, f64)>
where
    P: Fn(&Trajectory) -> bool + Sync,
{
    if grid.is_empty() {
        return Err(Error::invalid("empty α₀ grid"));
    }
    let candidates: Vec<Option<f64>> = grid
        .par_iter()
        .map(|a| match odeflow::hamilton_path(dist, a, step) {
            Ok(sol) if predicate(&sol.trajectory) => Some(sol.action),
            _ => None,
        })
        .collect();
    candidates
        .iter()
        .enumerate()
        .filter_map(|(i, f)| f.map(|f| (i, f)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, f)| (grid[i].clone(), f))
        .ok_or_else(|| Error::Infeasible("no grid point satisfies the predicate; the rate is +inf".into()))
}

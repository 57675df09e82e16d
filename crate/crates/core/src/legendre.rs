//! The cost function `L(x, β) = sup_α ⟨α, β⟩ - H(x, α)`.
//!
//! For a `d`-regular point mass the supremum has a closed form: writing
//! `p = d e / u` for the chance that a half-edge hits an empty vertex and
//! `m = -(β_e + 1)/d` for the target fraction of hits, `L = d KL(m ‖ p)`,
//! the Cramér rate of a `Binomial(d, p)` sample mean. Elsewhere the
//! supremum is found numerically.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{self, BOUNDARY_MASS};
use crate::model::{in_state_space, Covector, MacroState, Velocity, STATE_TOL};

/// How the supremum was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostStatus {
    /// Attained at a finite maximizer.
    Finite,
    /// Unbounded: `β` lies outside the effective domain.
    InfiniteEscaping,
    /// Finite but approached only as `|α| → ∞` (β on the edge of the domain).
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEval {
    pub value: f64,
    /// Flat `(α_s, α_u, α_0, .., α_D)` for [`cost_general`], `(α_s, α_u, α_e)`
    /// for [`cost_regular`].
    pub maximizer: Option<Vec<f64>>,
    pub status: CostStatus,
}

impl CostEval {
    fn infinite() -> Self {
        CostEval { value: f64::INFINITY, maximizer: None, status: CostStatus::InfiniteEscaping }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Controls for the numerical maximization in [`cost_general`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSolver {
    pub max_iter: usize,
    /// Stop once the gradient restricted to the curved directions is below this.
    pub grad_tol: f64,
    /// `|α|` beyond which the search is considered escaping.
    pub escape_norm: f64,
    /// Objective gain per step that still counts as escaping to `+∞`.
    pub escape_gain: f64,
    pub max_step: f64,
}

impl Default for CostSolver {
    fn default() -> Self {
        CostSolver { max_iter: 500, grad_tol: 1e-8, escape_norm: 1e3, escape_gain: 1e-12, max_step: 20.0 }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + b.abs())
}

/// `L(x, β)` for a general state, by Newton ascent with backtracking.
pub fn cost_general(x: &MacroState, beta: &Velocity) -> Result<CostEval> {
    cost_general_with(x, beta, &CostSolver::default())
}

pub fn cost_general_with(x: &MacroState, beta: &Velocity, solver: &CostSolver) -> Result<CostEval> {
    if !in_state_space(x, f64::INFINITY, STATE_TOL) {
        return Err(Error::invalid("state outside the state space"));
    }
    if beta.e.len() != x.e.len() {
        return Err(Error::invalid(format!(
            "state has {} degree classes, velocity has {}",
            x.e.len(),
            beta.e.len()
        )));
    }
    if !beta.is_finite() {
        return Err(Error::invalid("velocity must be finite"));
    }
    let dim = x.dim();
    let b = DVector::from_vec(beta.flat());
    if x.empty_mass() < BOUNDARY_MASS {
        // H ≡ 0 so the supremum of a linear form is 0 or +∞
        return Ok(if b.amax() <= 1e-12 {
            CostEval { value: 0.0, maximizer: Some(vec![0.0; dim]), status: CostStatus::Finite }
        } else {
            CostEval::infinite()
        });
    }
    if !close(beta.s, 1.0) {
        return Ok(CostEval::infinite());
    }

    // The support of Z^x spans mean + range(Cov); off that affine set L = +∞.
    let zero = Covector::zeros(x.max_degree());
    let mean = DVector::from_vec(hamiltonian::grad_alpha(x, &zero)?.flat());
    let cov = SymmetricEigen::new(hamiltonian::hessian_alpha(x, &zero)?);
    let top = cov.eigenvalues.amax();
    let cut = 1e-10 * top.max(1e-300);
    let range: Vec<usize> = (0..dim).filter(|&i| cov.eigenvalues[i] > cut).collect();
    let offset = &b - &mean;
    let mut off_support = offset.clone();
    for &i in &range {
        let v = cov.eigenvectors.column(i);
        off_support -= v * v.dot(&offset);
    }
    if off_support.norm() > 1e-9 * (1.0 + b.norm()) {
        return Ok(CostEval::infinite());
    }
    if range.is_empty() {
        // Z^x is deterministic and β is its value
        return Ok(CostEval { value: 0.0, maximizer: Some(vec![0.0; dim]), status: CostStatus::Finite });
    }
    let basis = DMatrix::from_fn(dim, range.len(), |r, c| cov.eigenvectors[(r, range[c])]);
    maximize(x, &b, &basis, solver)
}

fn objective(x: &MacroState, b: &DVector<f64>, alpha: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let a = Covector::from_flat(alpha.as_slice());
    let h = hamiltonian::evaluate(x, &a)?;
    let grad = b - DVector::from_vec(h.grad_alpha.flat());
    Ok((alpha.dot(b) - h.value, grad))
}

fn maximize(x: &MacroState, b: &DVector<f64>, basis: &DMatrix<f64>, solver: &CostSolver) -> Result<CostEval> {
    let dim = basis.nrows();
    let mut alpha = DVector::zeros(dim);
    let (mut f, mut grad) = objective(x, b, &alpha)?;
    for _ in 0..solver.max_iter {
        let g = basis.transpose() * &grad;
        let hess = hamiltonian::hessian_alpha(x, &Covector::from_flat(alpha.as_slice()))?;
        let reduced = SymmetricEigen::new(basis.transpose() * hess * basis);
        let floor = 1e-14 * reduced.eigenvalues.amax() + 1e-13;
        let coeffs = reduced.eigenvectors.transpose() * &g;
        let scaled = DVector::from_fn(coeffs.len(), |i, _| coeffs[i] / reduced.eigenvalues[i].max(floor));
        let mut dir = basis * (&reduced.eigenvectors * scaled);
        // A vanishing gradient with a Newton step that stays large means the
        // curvature is dying with it: the supremum sits at infinity.
        if g.norm() < solver.grad_tol {
            return Ok(if dir.norm() < 1e-3 {
                CostEval { value: f, maximizer: Some(alpha.as_slice().to_vec()), status: CostStatus::Finite }
            } else {
                CostEval { value: f, maximizer: None, status: CostStatus::Boundary }
            });
        }
        if dir.norm() > solver.max_step {
            dir *= solver.max_step / dir.norm();
        }
        let slope = dir.dot(&grad);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..80 {
            let trial = &alpha + &dir * t;
            match objective(x, b, &trial) {
                Ok((ft, gt)) => {
                    let armijo = ft >= f + 1e-4 * t * slope;
                    // near the optimum f changes below its own rounding error
                    let flat = ft >= f - 1e-14 * (1.0 + f.abs())
                        && (basis.transpose() * &gt).norm() < g.norm();
                    if armijo || flat {
                        accepted = Some((trial, ft, gt));
                        break;
                    }
                    t *= 0.5;
                }
                Err(Error::Domain { .. }) => t *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((next, f_next, g_next)) = accepted else {
            return Err(Error::NumericalFailure(format!(
                "line search stalled with gradient norm {:.3e}",
                g.norm()
            )));
        };
        let gain = f_next - f;
        alpha = next;
        f = f_next;
        grad = g_next;
        if alpha.norm() > solver.escape_norm {
            return Ok(if gain > solver.escape_gain {
                CostEval::infinite()
            } else {
                CostEval { value: f, maximizer: None, status: CostStatus::Boundary }
            });
        }
    }
    Err(Error::NumericalFailure(format!(
        "no convergence after {} iterations, gradient norm {:.3e}",
        solver.max_iter,
        (basis.transpose() * &grad).norm()
    )))
}

fn kl_term(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * (a / b).ln()
    }
}

/// Closed-form `L` for a `d`-regular point mass on `x = (s, u, e)`, `β = (β_s, β_u, β_e)`.
///
/// The maximizer is `α_e* = log[p (1 - m) / ((1 - p) m)]`, equivalently
/// `log[(d e / (d e - u)) (d / (β_e + 1) + 1)]`, and the value
/// `(β_e + 1) α_e* - d log[1 + (exp(-α_e*) - 1) p]`.
///
/// The end points of `β_e ∈ [-(d+1), -1]` are limits with `|α_e*| → ∞`:
/// at `β_e = -1` (`m = 0`, no half-edge hits an empty vertex) the value tends
/// to `-d log(1 - p)`, and at `β_e = -(d+1)` (`m = 1`, all of them do) to
/// `-d log p`; both are `d KL(m ‖ p)` with `0 log 0 = 0`.
pub fn cost_regular(d: usize, x: [f64; 3], beta: [f64; 3]) -> Result<CostEval> {
    if d < 2 {
        return Err(Error::invalid(format!("degree must be at least 2, got {d}")));
    }
    if x.iter().chain(&beta).any(|v| !v.is_finite()) {
        return Err(Error::invalid("state and velocity must be finite"));
    }
    let df = d as f64;
    if x[2] < 0.0 || x[1] < 0.0 || x[1] < df * x[2] * (1.0 - 1e-12) {
        return Err(Error::invalid(format!("need u ≥ d e ≥ 0, got u = {}, e = {}", x[1], x[2])));
    }
    let at_zero = CostEval { value: 0.0, maximizer: Some(vec![0.0; 3]), status: CostStatus::Finite };
    if x[2] == 0.0 {
        return Ok(if beta[2] == 0.0 { at_zero } else { CostEval::infinite() });
    }
    if !close(beta[0], 1.0) || !close(beta[1], -2.0 * df) {
        return Ok(CostEval::infinite());
    }
    let p = (df * x[2] / x[1]).min(1.0);
    let m = -(beta[2] + 1.0) / df;
    if !(0.0..=1.0).contains(&m) {
        return Ok(CostEval::infinite());
    }
    if m == p {
        return Ok(at_zero);
    }
    if (m > 0.0 && p == 0.0) || (m < 1.0 && p == 1.0) {
        return Ok(CostEval::infinite());
    }
    if m == 0.0 || m == 1.0 {
        let value = df * (kl_term(m, p) + kl_term(1.0 - m, 1.0 - p));
        return Ok(CostEval { value, maximizer: None, status: CostStatus::Boundary });
    }
    let alpha = (p * (1.0 - m) / ((1.0 - p) * m)).ln();
    // 1 + (exp(-α*) - 1) p simplifies to (1 - p)/(1 - m)
    let value = (beta[2] + 1.0) * alpha - df * ((1.0 - p) / (1.0 - m)).ln();
    Ok(CostEval { value: value.max(0.0), maximizer: Some(vec![0.0, 0.0, alpha]), status: CostStatus::Finite })
}

/// `L̂(t, x, y)`: the cost of the empties-only process with `u(t) = d(1 - 2t)`.
pub fn cost_e_reduced(d: usize, t: f64, x: f64, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("time {t} outside [0, 1]")));
    }
    let u = d as f64 * (1.0 - 2.0 * t);
    Ok(cost_regular(d, [t, u, x], [1.0, -2.0 * d as f64, y])?.value)
}

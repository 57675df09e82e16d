//! The limiting Hamiltonian and its derivatives.
//!
//! `H(x, α)` is the log moment generating function of the increment `Z^x`:
//!
//! ```text
//! H(x, α) = log Σ_k exp(α_s - 2k α_u - α_k) g(x, α)^k e_k / Σ_j e_j
//! g(x, α) = 1 + Σ_j (exp(-α_j) - 1) j e_j / u
//! ```
//!
//! and `H = 0` when `Σ_j e_j = 0`. The `k = 0` term is `exp(α_s - α_0) e_0 / Σe`.
//! Everything is evaluated in log-sum-exp form, with `g` written as
//! `(u - Σ j e_j)/u + Σ_j (j e_j / u) exp(-α_j)` so that it stays accurate
//! when all half-edges sit on empty vertices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Covector, MacroState, Velocity};

/// Empty mass below which a state counts as extinct (`H ≡ 0`).
pub const BOUNDARY_MASS: f64 = 1e-14;

/// Value and both gradients at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianEval {
    pub value: f64,
    pub grad_alpha: Velocity,
    /// Partial derivatives in `(s, u, e_0, .., e_D)`.
    pub grad_x: Covector,
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Intermediate quantities shared by the value and the derivatives.
struct Terms {
    value: f64,
    /// `(k, w_k)` over degrees with `e_k > 0`; `w` is the tilted law of `K`.
    weights: Vec<(usize, f64)>,
    /// `Σ_k k w_k`.
    mean_degree: f64,
    log_g: f64,
    /// `c_j = (j e_j / u) exp(-α_j) / g`, tilted chance a half-edge hits degree `j`.
    hit: Vec<f64>,
    /// `w_j / e_j`, finite even where `e_j = 0`.
    weight_per_mass: Vec<f64>,
    mass: f64,
}

fn check_shapes(x: &MacroState, alpha: &Covector) -> Result<()> {
    if x.e.len() != alpha.e.len() {
        return Err(Error::invalid(format!(
            "state has {} degree classes, covector has {}",
            x.e.len(),
            alpha.e.len()
        )));
    }
    Ok(())
}

fn terms(x: &MacroState, alpha: &Covector) -> Result<Option<Terms>> {
    check_shapes(x, alpha)?;
    let mass = x.empty_mass();
    if mass < BOUNDARY_MASS {
        return Ok(None);
    }
    let half_edges = x.empty_half_edges();
    let n = x.e.len();
    let mut hit = vec![0.0; n];
    let log_g = if half_edges > 0.0 {
        if !(x.u > 0.0) {
            return Err(Error::Domain { base: f64::NEG_INFINITY });
        }
        let mut blocked_share = (x.u - half_edges) / x.u;
        if blocked_share < 0.0 && blocked_share > -1e-9 {
            // rounding on the face u = Σ j e_j
            blocked_share = 0.0;
        }
        let log_rho = |j: usize| (j as f64 * x.e[j] / x.u).ln();
        let log_g = if blocked_share >= 0.0 {
            let blocked_term = if blocked_share > 0.0 { blocked_share.ln() } else { f64::NEG_INFINITY };
            let hits = (1..n).filter(|&j| x.e[j] > 0.0).map(|j| log_rho(j) - alpha.e[j]);
            log_sum_exp(std::iter::once(blocked_term).chain(hits))
        } else {
            let g = blocked_share
                + (1..n)
                    .filter(|&j| x.e[j] > 0.0)
                    .map(|j| j as f64 * x.e[j] / x.u * (-alpha.e[j]).exp())
                    .sum::<f64>();
            if !(g > 0.0) {
                return Err(Error::Domain { base: g });
            }
            g.ln()
        };
        for j in 1..n {
            if x.e[j] > 0.0 {
                hit[j] = (log_rho(j) - alpha.e[j] - log_g).exp();
            }
        }
        log_g
    } else {
        0.0
    };

    let log_mass = mass.ln();
    let exponent = |k: usize| alpha.s - 2.0 * k as f64 * alpha.u - alpha.e[k] + k as f64 * log_g;
    let logs: Vec<(usize, f64)> = (0..n)
        .filter(|&k| x.e[k] > 0.0)
        .map(|k| (k, exponent(k) + x.e[k].ln() - log_mass))
        .collect();
    let value = log_sum_exp(logs.iter().map(|&(_, l)| l));
    if !value.is_finite() {
        return Err(Error::NumericalFailure(format!("Hamiltonian overflowed to {value}")));
    }
    let weights: Vec<(usize, f64)> = logs.iter().map(|&(k, l)| (k, (l - value).exp())).collect();
    let mean_degree = weights.iter().map(|&(k, w)| k as f64 * w).sum();
    let weight_per_mass = (0..n).map(|j| (exponent(j) - log_mass - value).exp()).collect();
    Ok(Some(Terms { value, weights, mean_degree, log_g, hit, weight_per_mass, mass }))
}

/// `H(x, α)`.
pub fn hamiltonian(x: &MacroState, alpha: &Covector) -> Result<f64> {
    Ok(terms(x, alpha)?.map_or(0.0, |t| t.value))
}

/// `∂H/∂α`, the tilted mean increment.
pub fn grad_alpha(x: &MacroState, alpha: &Covector) -> Result<Velocity> {
    Ok(match terms(x, alpha)? {
        Some(t) => grad_alpha_from(&t, x.max_degree()),
        None => Velocity::zeros(x.max_degree()),
    })
}

fn grad_alpha_from(t: &Terms, max_degree: usize) -> Velocity {
    let mut v = Velocity::zeros(max_degree);
    v.s = 1.0;
    v.u = -2.0 * t.mean_degree;
    for (i, hit) in t.hit.iter().enumerate() {
        v.e[i] = -t.mean_degree * hit;
    }
    for &(k, w) in &t.weights {
        v.e[k] -= w;
    }
    v
}

/// `∂H/∂x` in `(s, u, e_0, .., e_D)`; the `s` component is always 0.
///
/// Where `u = 0` (no half-edges left at all) the `e_j`, `j ≥ 1`, directions
/// leave the state space and their `g`-derivative is taken as 0.
pub fn grad_x(x: &MacroState, alpha: &Covector) -> Result<Covector> {
    Ok(match terms(x, alpha)? {
        Some(t) => grad_x_from(&t, x, alpha),
        None => Covector::zeros(x.max_degree()),
    })
}

fn grad_x_from(t: &Terms, x: &MacroState, alpha: &Covector) -> Covector {
    let mut g = Covector::zeros(x.max_degree());
    let inv_g = (-t.log_g).exp();
    if x.u > 0.0 {
        g.u = -t.mean_degree * (-(-t.log_g).exp_m1()) / x.u;
    }
    for i in 0..x.e.len() {
        let through_g = if x.u > 0.0 && i > 0 {
            t.mean_degree * i as f64 * (-alpha.e[i]).exp_m1() * inv_g / x.u
        } else {
            0.0
        };
        g.e[i] = through_g + t.weight_per_mass[i] - 1.0 / t.mass;
    }
    g
}

/// Value and both gradients in one pass.
pub fn evaluate(x: &MacroState, alpha: &Covector) -> Result<HamiltonianEval> {
    Ok(match terms(x, alpha)? {
        Some(t) => HamiltonianEval {
            value: t.value,
            grad_alpha: grad_alpha_from(&t, x.max_degree()),
            grad_x: grad_x_from(&t, x, alpha),
        },
        None => HamiltonianEval {
            value: 0.0,
            grad_alpha: Velocity::zeros(x.max_degree()),
            grad_x: Covector::zeros(x.max_degree()),
        },
    })
}

/// `∂²H/∂α²`, the covariance of `Z^x` under the tilt `α`.
///
/// Its null space does not depend on `α`: tilting keeps the support of `Z^x`.
pub fn hessian_alpha(x: &MacroState, alpha: &Covector) -> Result<DMatrix<f64>> {
    let dim = x.dim();
    let mut hess = DMatrix::zeros(dim, dim);
    let Some(t) = terms(x, alpha)? else {
        return Ok(hess);
    };
    let mean = grad_alpha_from(&t, x.max_degree()).flat();
    let n = x.e.len();
    let mut centred = vec![0.0; dim];
    for &(k, w) in &t.weights {
        // gradient of the k-th log term
        centred.iter_mut().for_each(|c| *c = 0.0);
        centred[0] = 1.0;
        centred[1] = -2.0 * k as f64;
        centred[2 + k] -= 1.0;
        for j in 1..n {
            centred[2 + j] -= k as f64 * t.hit[j];
        }
        for (c, m) in centred.iter_mut().zip(&mean) {
            *c -= m;
        }
        for a in 0..dim {
            if centred[a] == 0.0 {
                continue;
            }
            for b in 0..dim {
                hess[(a, b)] += w * centred[a] * centred[b];
            }
        }
    }
    for i in 1..n {
        hess[(2 + i, 2 + i)] += t.mean_degree * t.hit[i];
        for j in 1..n {
            hess[(2 + i, 2 + j)] -= t.mean_degree * t.hit[i] * t.hit[j];
        }
    }
    Ok(hess)
}

/// Closed forms for a point mass at degree `d`, on `x = (s, u, e)` and
/// `α = (α_s, α_u, α_e)`:
/// `H = α_s - 2d α_u - α_e + d log[1 + (exp(-α_e) - 1) d e / u]`, and 0 when `e = 0`.
pub mod regular {
    use super::*;

    fn hit_base(d: usize, x: [f64; 3], alpha_e: f64) -> Result<(f64, f64)> {
        if !(x[1] > 0.0) {
            return Err(Error::Domain { base: f64::NEG_INFINITY });
        }
        let p = d as f64 * x[2] / x[1];
        let g = (x[1] - d as f64 * x[2]) / x[1] + p * (-alpha_e).exp();
        if !(g > 0.0) {
            return Err(Error::Domain { base: g });
        }
        Ok((p, g))
    }

    pub fn hamiltonian(d: usize, x: [f64; 3], alpha: [f64; 3]) -> Result<f64> {
        if x[2] == 0.0 {
            return Ok(0.0);
        }
        let (_, g) = hit_base(d, x, alpha[2])?;
        let d = d as f64;
        Ok(alpha[0] - 2.0 * d * alpha[1] - alpha[2] + d * g.ln())
    }

    pub fn grad_alpha(d: usize, x: [f64; 3], alpha: [f64; 3]) -> Result<[f64; 3]> {
        if x[2] == 0.0 {
            return Ok([0.0; 3]);
        }
        let (p, g) = hit_base(d, x, alpha[2])?;
        let d = d as f64;
        Ok([1.0, -2.0 * d, -1.0 - d * p * (-alpha[2]).exp() / g])
    }

    pub fn grad_x(d: usize, x: [f64; 3], alpha: [f64; 3]) -> Result<[f64; 3]> {
        if x[2] == 0.0 {
            return Ok([0.0; 3]);
        }
        let (_, g) = hit_base(d, x, alpha[2])?;
        let d = d as f64;
        let shift = (-alpha[2]).exp_m1();
        let du = -d * shift * d * x[2] / (x[1] * x[1] * g);
        let de = d * shift * d / (x[1] * g);
        Ok([0.0, du, de])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn regular_point(d: usize, x: [f64; 3]) -> MacroState {
        let mut e = vec![0.0; d + 1];
        e[d] = x[2];
        MacroState::new(x[0], x[1], e)
    }

    fn regular_alpha(d: usize, a: [f64; 3]) -> Covector {
        let mut e = vec![0.0; d + 1];
        e[d] = a[2];
        Covector::new(a[0], a[1], e)
    }

    fn interior(e: Vec<f64>, slack: f64) -> MacroState {
        let half: f64 = e.iter().enumerate().map(|(j, v)| j as f64 * v).sum();
        MacroState::new(0.3, half + slack, e)
    }

    #[test]
    fn zero_tilt_gives_zero() {
        let x = interior(vec![0.1, 0.2, 0.0, 0.3], 0.4);
        let a = Covector::zeros(3);
        assert!(hamiltonian(&x, &a).unwrap().abs() < 1e-15);
        let g = grad_x(&x, &a).unwrap();
        assert!(g.flat().iter().all(|v| v.abs() < 1e-14), "{g:?}");
    }

    #[test]
    fn zero_tilt_velocity_is_the_fluid_field() {
        let x = interior(vec![0.1, 0.2, 0.05, 0.3], 0.4);
        let v = grad_alpha(&x, &Covector::zeros(3)).unwrap();
        let mass = x.empty_mass();
        let half = x.empty_half_edges();
        assert_eq!(v.s, 1.0);
        assert!((v.u + 2.0 * half / mass).abs() < 1e-14);
        for i in 0..4 {
            let expected = (-x.e[i] - i as f64 * x.e[i] / x.u * half) / mass;
            assert!((v.e[i] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn regular_velocity_at_zero_tilt() {
        let (d, x) = (4, [0.1, 3.0, 0.5]);
        let v = regular::grad_alpha(d, x, [0.0; 3]).unwrap();
        assert_eq!(v[0], 1.0);
        assert_eq!(v[1], -8.0);
        assert!((v[2] - (-1.0 - 16.0 * 0.5 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn extinct_state_is_flat() {
        let x = MacroState::new(0.4, 0.2, vec![0.0, 0.0, 0.0]);
        let a = Covector::new(1.0, 2.0, vec![3.0, 4.0, 5.0]);
        assert_eq!(hamiltonian(&x, &a).unwrap(), 0.0);
        assert_eq!(grad_alpha(&x, &a).unwrap(), Velocity::zeros(2));
        assert_eq!(regular::hamiltonian(2, [0.4, 0.2, 0.0], [1.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn outside_state_space_is_a_domain_error() {
        // Σ j e_j = 2 > u = 0.5 and a large tilt drives g below zero
        let x = MacroState::new(0.0, 0.5, vec![0.0, 0.0, 1.0]);
        let a = Covector::new(0.0, 0.0, vec![0.0, 0.0, 5.0]);
        assert!(matches!(hamiltonian(&x, &a), Err(Error::Domain { .. })));
        assert!(matches!(
            regular::hamiltonian(2, [0.0, 0.5, 1.0], [0.0, 0.0, 5.0]),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn regular_du_matches_printed_derivative() {
        let (d, x, a): (usize, [f64; 3], [f64; 3]) = (3, [0.2, 1.8, 0.4], [0.3, -0.2, 0.7]);
        let df = d as f64;
        let shift = (-a[2]).exp() - 1.0;
        let printed = -df * shift * df * x[2] / (x[1] * x[1] + x[1] * shift * df * x[2]);
        let du = regular::grad_x(d, x, a).unwrap()[1];
        assert!((du - printed).abs() < 1e-13);
    }

    #[test]
    fn hessian_is_symmetric_with_structural_null_space() {
        let x = interior(vec![0.0, 0.2, 0.0, 0.3], 0.4);
        let a = Covector::new(0.1, 0.2, vec![0.0, -0.3, 0.0, 0.5]);
        let h = hessian_alpha(&x, &a).unwrap();
        assert!((&h - h.transpose()).amax() < 1e-14);
        // α_s and the empty classes 0 and 2 do not move H
        for idx in [0, 2, 4] {
            assert!(h.row(idx).amax() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn general_matches_regular_specialisation(
            d in 2usize..8, t in 0.0f64..0.45, frac in 0.01f64..1.0,
            a0 in -2.0f64..2.0, a1 in -2.0f64..2.0, a2 in -3.0f64..3.0,
        ) {
            let u = d as f64 * (1.0 - 2.0 * t);
            let x = [t, u, frac * (1.0 - 2.0 * t)];
            let a = [a0, a1, a2];
            let general = hamiltonian(&regular_point(d, x), &regular_alpha(d, a)).unwrap();
            let special = regular::hamiltonian(d, x, a).unwrap();
            prop_assert!((general - special).abs() < 1e-12);
            let ga = grad_alpha(&regular_point(d, x), &regular_alpha(d, a)).unwrap();
            let sa = regular::grad_alpha(d, x, a).unwrap();
            prop_assert!((ga.s - sa[0]).abs() < 1e-12 && (ga.u - sa[1]).abs() < 1e-12);
            prop_assert!((ga.e[d] - sa[2]).abs() < 1e-12);
            let gx = grad_x(&regular_point(d, x), &regular_alpha(d, a)).unwrap();
            let sx = regular::grad_x(d, x, a).unwrap();
            prop_assert!((gx.u - sx[1]).abs() < 1e-10 * (1.0 + sx[1].abs()));
            prop_assert!((gx.e[d] - sx[2]).abs() < 1e-10 * (1.0 + sx[2].abs()));
        }

        #[test]
        fn convex_in_alpha(
            e in prop::collection::vec(0.0f64..1.0, 4),
            slack in 0.0f64..1.0,
            a in prop::collection::vec(-2.0f64..2.0, 6),
            b in prop::collection::vec(-2.0f64..2.0, 6),
        ) {
            prop_assume!(e.iter().sum::<f64>() > 1e-3);
            let x = interior(e, slack);
            let a = Covector::from_flat(&a);
            let b = Covector::from_flat(&b);
            let mid = Covector::from_flat(
                &a.flat().iter().zip(b.flat()).map(|(p, q)| 0.5 * (p + q)).collect::<Vec<_>>(),
            );
            let h = |c: &Covector| hamiltonian(&x, c).unwrap();
            prop_assert!(h(&mid) <= 0.5 * (h(&a) + h(&b)) + 1e-10);
        }

        #[test]
        fn linear_in_alpha_s(
            e in prop::collection::vec(0.0f64..1.0, 3),
            slack in 0.0f64..1.0,
            a in prop::collection::vec(-2.0f64..2.0, 5),
            shift in -5.0f64..5.0,
        ) {
            prop_assume!(e.iter().sum::<f64>() > 1e-3);
            let x = interior(e, slack);
            let a = Covector::from_flat(&a);
            let mut shifted = a.clone();
            shifted.s += shift;
            let diff = hamiltonian(&x, &shifted).unwrap() - hamiltonian(&x, &a).unwrap();
            prop_assert!((diff - shift).abs() < 1e-12);
        }
    }
}

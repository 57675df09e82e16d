use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::model::{MacroState, Velocity};

/// Draw the limiting one-step increment `Z^x` at a macroscopic state.
///
/// With probability `e_k / Σe` the selected vertex has degree `k`. Degree 0
/// gives `(1, 0, -1, 0, ..)`. Otherwise `B ~ Bin(k, 1 - Σ j e_j / u)` of its
/// half-edges land on blocked vertices and the rest are spread over empty
/// degrees by `Mult(k - B, q_i = i e_i / Σ j e_j)`.
pub fn sample_increment<R: Rng + ?Sized>(x: &MacroState, rng: &mut R) -> Result<Velocity> {
    let mass = x.empty_mass();
    if !(mass > 0.0) {
        return Err(Error::Contract("increment undefined without empty mass".into()));
    }
    let mut r = rng.random::<f64>() * mass;
    let mut k = x.e.len() - 1;
    for (j, &e) in x.e.iter().enumerate() {
        if e > 0.0 && r < e {
            k = j;
            break;
        }
        r -= e;
    }
    while x.e[k] <= 0.0 {
        // rounding pushed the draw past the end
        k -= 1;
    }

    let mut z = Velocity::zeros(x.max_degree());
    z.s = 1.0;
    if k == 0 {
        z.e[0] = -1.0;
        return Ok(z);
    }
    let half_edges = x.empty_half_edges();
    let p_blocked = (1.0 - half_edges / x.u).clamp(0.0, 1.0);
    let blocked = sample_binomial(rng, k as u64, p_blocked);
    let mut left = k as u64 - blocked;
    let mut rest = half_edges;
    for i in 1..x.e.len() {
        if left == 0 {
            break;
        }
        let weight = i as f64 * x.e[i];
        if weight <= 0.0 {
            continue;
        }
        let m = if weight >= rest {
            left
        } else {
            sample_binomial(rng, left, weight / rest)
        };
        z.e[i] = -(m as f64);
        left -= m;
        rest -= weight;
    }
    z.u = -2.0 * k as f64;
    z.e[k] -= 1.0;
    Ok(z)
}

fn sample_binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("probability in (0,1)").sample(rng)
    }
}

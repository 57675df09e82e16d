//! Distributional sampler: the transition drawn as a cascade of counts.
//!
//! 1. degree `k` of the chosen vertex from the empty-degree counts;
//! 2. `H`, the number of its half-edges paired outside it;
//! 3. `B | H ~ Hyper(U - k, U_blocked, H)`;
//! 4. `(W_1, .., W_D) | H, B` multivariate hypergeometric over empty half-edges;
//! 5. `W̃_j | W_j`, distinct vertices hit when `W_j` half-edges are drawn
//!    without replacement from the `E(j)` remaining degree-`j` empties.
//!
//! `H` follows the law of non-loop pairings in a uniform matching, which is
//! not hypergeometric for small `U` (two of the vertex's own half-edges are
//! consumed by each loop). Steps 3 to 5 are exact hypergeometric laws.

use rand::Rng;
use rand_distr::{Distribution, Hypergeometric};

use super::{ChainState, StepOutcome};
use crate::error::{Error, Result};

/// One step via the cascade; equal in law to [`super::step_exact`].
pub fn step_cascade<R: Rng + ?Sized>(
    state: &ChainState,
    rng: &mut R,
) -> Result<(ChainState, StepOutcome)> {
    let mut next = state.clone();
    let outcome = next.advance_cascade(rng)?;
    Ok((next, outcome))
}

/// Law of `H` when `k` of `unpaired` half-edges belong to the chosen vertex.
///
/// Entry `h` is `P(H = h)`; only `h ≡ k (mod 2)` has mass.
pub fn non_loop_pmf(unpaired: usize, k: usize) -> Vec<f64> {
    assert!(k <= unpaired, "vertex has more half-edges than are unpaired");
    // mass[r][h]: r own half-edges still unpaired after h non-loop pairings
    let others = unpaired - k;
    let mut mass = vec![vec![0.0f64; k + 1]; k + 1];
    mass[k][0] = 1.0;
    for own in (1..=k).rev() {
        for h in 0..=k {
            let p = mass[own][h];
            if p == 0.0 {
                continue;
            }
            let rest = own - 1;
            let free_others = others - h;
            let total = (rest + free_others) as f64;
            if rest > 0 {
                mass[rest - 1][h] += p * rest as f64 / total;
            }
            if free_others > 0 {
                mass[rest][h + 1] += p * free_others as f64 / total;
            }
        }
    }
    mass.swap_remove(0)
}

fn hypergeometric<R: Rng + ?Sized>(rng: &mut R, total: usize, successes: usize, draws: usize) -> usize {
    if draws == 0 || successes == 0 {
        return 0;
    }
    if successes == total {
        return draws;
    }
    Hypergeometric::new(total as u64, successes as u64, draws as u64)
        .expect("valid hypergeometric parameters")
        .sample(rng) as usize
}

/// Distinct owners among `draws` half-edges taken without replacement from
/// `vertices` vertices of degree `degree`.
fn distinct_owners<R: Rng + ?Sized>(rng: &mut R, vertices: usize, degree: usize, draws: usize) -> usize {
    let total = vertices * degree;
    let mut owners = 0;
    for i in 0..draws {
        let untouched = degree * (vertices - owners);
        if rng.random_range(0..total - i) < untouched {
            owners += 1;
        }
    }
    owners
}

impl ChainState {
    /// In-place cascade transition.
    pub fn advance_cascade<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<StepOutcome> {
        self.ensure_not_absorbed()?;
        let max_degree = self.max_degree();
        let unpaired = self.unpaired();

        let mut r = rng.random_range(0..self.empty_total());
        let k = self
            .empty
            .iter()
            .position(|&c| {
                if r < c {
                    true
                } else {
                    r -= c;
                    false
                }
            })
            .expect("draw below the empty total");
        self.empty[k] -= 1;
        let mut outcome = StepOutcome::new(k, max_degree);

        let mut own = k;
        let mut h = 0;
        while own > 0 {
            own -= 1;
            let free_others = unpaired - k - h;
            let total = own + free_others;
            if total == 0 {
                return Err(Error::Contract("half-edge without a partner".into()));
            }
            if rng.random_range(0..total) < own {
                own -= 1;
            } else {
                h += 1;
            }
        }
        outcome.non_loop = h;

        let b = hypergeometric(rng, unpaired - k, self.blocked_half_edges, h);
        outcome.to_blocked = b;

        let mut pool: usize = (1..=max_degree).map(|j| j * self.empty[j]).sum();
        let mut left = h - b;
        for j in 1..=max_degree {
            if left == 0 {
                break;
            }
            let class = j * self.empty[j];
            let w = hypergeometric(rng, pool, class, left);
            pool -= class;
            left -= w;
            outcome.pairings_into_empty[j] = w;
        }

        let mut blocked_gain = 0;
        for j in 1..=max_degree {
            let w = outcome.pairings_into_empty[j];
            if w == 0 {
                continue;
            }
            let wt = distinct_owners(rng, self.empty[j], j, w);
            outcome.newly_blocked[j] = wt;
            self.empty[j] -= wt;
            self.blocked += wt;
            blocked_gain += j * wt - w;
        }
        self.blocked_half_edges = self.blocked_half_edges - b + blocked_gain;
        self.independent += 1;
        self.step += 1;
        Ok(outcome)
    }
}

//! Literal half-edge pairing.

use rand::Rng;

use super::{ChainState, StepOutcome};
use crate::error::{Error, Result};

/// Source of the discrete uniform choices made by the exact simulator.
///
/// `choose` must return `i` with probability `weights[i] / Σ weights`.
/// Besides random sampling this lets an enumerator replay every branch of
/// the simulator with its exact weight.
pub trait Chooser {
    fn choose(&mut self, weights: &[u64]) -> usize;
}

/// Samples choices from a random number generator.
pub struct RngChooser<'a, R: ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> Chooser for RngChooser<'_, R> {
    fn choose(&mut self, weights: &[u64]) -> usize {
        let total: u64 = weights.iter().sum();
        debug_assert!(total > 0);
        let mut r = self.0.random_range(0..total);
        for (i, &w) in weights.iter().enumerate() {
            if r < w {
                return i;
            }
            r -= w;
        }
        unreachable!("draw below the weight total")
    }
}

/// One step by literal pairing: returns the new state and what happened.
pub fn step_exact<R: Rng + ?Sized>(
    state: &ChainState,
    rng: &mut R,
) -> Result<(ChainState, StepOutcome)> {
    let mut next = state.clone();
    let outcome = next.advance_exact(&mut RngChooser(rng))?;
    Ok((next, outcome))
}

impl ChainState {
    /// In-place exact transition.
    ///
    /// Choice layout at each pairing: `[loop, blocked, hit_0.., class_1..class_D]`
    /// where `hit_i` are vertices already touched during this step.
    pub fn advance_exact<C: Chooser + ?Sized>(&mut self, chooser: &mut C) -> Result<StepOutcome> {
        self.ensure_not_absorbed()?;
        let max_degree = self.max_degree();
        let k = chooser.choose(&self.empty.iter().map(|&c| c as u64).collect::<Vec<_>>());
        self.empty[k] -= 1;
        let mut outcome = StepOutcome::new(k, max_degree);

        // (degree, unpaired half-edges left) of empties hit during this step
        let mut hits: Vec<(usize, usize)> = Vec::with_capacity(k);
        let mut weights: Vec<u64> = Vec::with_capacity(max_degree + 2 + k);
        let mut own = k;
        while own > 0 {
            own -= 1;
            weights.clear();
            weights.push(own as u64);
            weights.push(self.blocked_half_edges as u64);
            weights.extend(hits.iter().map(|&(_, rem)| rem as u64));
            weights.extend((1..=max_degree).map(|j| (j * self.empty[j]) as u64));
            if weights.iter().all(|&w| w == 0) {
                return Err(Error::Contract("half-edge without a partner".into()));
            }
            let pick = chooser.choose(&weights);
            let n_hits = hits.len();
            match pick {
                0 => own -= 1,
                1 => {
                    self.blocked_half_edges -= 1;
                    outcome.non_loop += 1;
                    outcome.to_blocked += 1;
                }
                i if i < 2 + n_hits => {
                    let hit = &mut hits[i - 2];
                    hit.1 -= 1;
                    outcome.non_loop += 1;
                    outcome.pairings_into_empty[hit.0] += 1;
                }
                i => {
                    let j = i - 2 - n_hits + 1;
                    self.empty[j] -= 1;
                    hits.push((j, j - 1));
                    outcome.non_loop += 1;
                    outcome.pairings_into_empty[j] += 1;
                    outcome.newly_blocked[j] += 1;
                }
            }
        }

        self.blocked += hits.len();
        self.blocked_half_edges += hits.iter().map(|&(_, rem)| rem).sum::<usize>();
        self.independent += 1;
        self.step += 1;
        Ok(outcome)
    }
}

//! Exact simulation of the greedy exploration on a configuration model.
//!
//! The graph is built while the independent set grows: at each step a
//! uniformly chosen empty vertex joins the set and each of its half-edges is
//! paired with a uniformly chosen unpaired half-edge. Vertices hit by those
//! pairings become blocked.
//!
//! Blocked vertices are never revisited, so only the total number of their
//! unpaired half-edges matters. Empty vertices of equal degree are
//! exchangeable and all their half-edges are unpaired, so a state is fully
//! described by class counts. Both simulators below are exact in law.

mod cascade;
mod exact;
mod increment;

pub use cascade::{non_loop_pmf, step_cascade};
pub use exact::{step_exact, Chooser, RngChooser};
pub use increment::sample_increment;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DegreeSequence, MacroState};

/// Seed record of a run: master seed plus stream index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct RunSeed {
    pub master: u64,
    pub stream: u64,
}

impl RunSeed {
    pub fn new(master: u64, stream: u64) -> Self {
        Self { master, stream }
    }

    /// Counter-based generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }
}

/// Microscopic state `X_n = (S, U, E(0), .., E(D))` plus blocked bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainState {
    step: usize,
    n_vertices: usize,
    independent: usize,
    blocked: usize,
    blocked_half_edges: usize,
    empty: Vec<usize>,
}

/// `(S, U, E(0..=D))`, the observable part of a state.
pub type StateKey = (usize, usize, Vec<usize>);

impl ChainState {
    /// All vertices empty, nothing paired.
    pub fn initial(seq: &DegreeSequence) -> Self {
        Self {
            step: 0,
            n_vertices: seq.len(),
            independent: 0,
            blocked: 0,
            blocked_half_edges: 0,
            empty: seq.counts(),
        }
    }

    /// Arbitrary reachable-looking state, checked for consistency.
    pub fn from_counts(
        independent: usize,
        blocked: usize,
        blocked_half_edges: usize,
        empty: Vec<usize>,
    ) -> Result<Self> {
        if empty.is_empty() {
            return Err(Error::invalid("empty-count vector needs at least degree 0"));
        }
        if blocked == 0 && blocked_half_edges > 0 {
            return Err(Error::invalid("unpaired blocked half-edges without blocked vertices"));
        }
        let state = Self {
            step: independent,
            n_vertices: independent + blocked + empty.iter().sum::<usize>(),
            independent,
            blocked,
            blocked_half_edges,
            empty,
        };
        if state.unpaired() % 2 != 0 {
            return Err(Error::invalid("odd number of unpaired half-edges"));
        }
        Ok(state)
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// `S_n`.
    pub fn independent(&self) -> usize {
        self.independent
    }

    pub fn blocked(&self) -> usize {
        self.blocked
    }

    pub fn blocked_half_edges(&self) -> usize {
        self.blocked_half_edges
    }

    /// `E_n(j)` for `j = 0..=D`.
    pub fn empty_counts(&self) -> &[usize] {
        &self.empty
    }

    pub fn max_degree(&self) -> usize {
        self.empty.len() - 1
    }

    pub fn empty_total(&self) -> usize {
        self.empty.iter().sum()
    }

    pub fn empty_half_edges(&self) -> usize {
        self.empty.iter().enumerate().map(|(j, c)| j * c).sum()
    }

    /// `U_n`.
    pub fn unpaired(&self) -> usize {
        self.blocked_half_edges + self.empty_half_edges()
    }

    pub fn is_absorbed(&self) -> bool {
        self.empty_total() == 0
    }

    pub fn key(&self) -> StateKey {
        (self.independent, self.unpaired(), self.empty.clone())
    }

    /// `X_n / N`.
    pub fn rescaled(&self) -> MacroState {
        let n = self.n_vertices as f64;
        MacroState::new(
            self.independent as f64 / n,
            self.unpaired() as f64 / n,
            self.empty.iter().map(|&c| c as f64 / n).collect(),
        )
    }

    fn ensure_not_absorbed(&self) -> Result<()> {
        if self.is_absorbed() {
            Err(Error::Contract("no empty vertex left to select".into()))
        } else {
            Ok(())
        }
    }
}

/// Realised transition variables of one step.
///
/// `pairings_into_empty[j]` is `W_j` and `newly_blocked[j]` is `W̃_j`; both
/// are indexed by degree with slot 0 always zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepOutcome {
    pub chosen_degree: usize,
    /// `H`: half-edges of the chosen vertex paired outside it.
    pub non_loop: usize,
    /// `B`: pairings into vertices blocked before this step.
    pub to_blocked: usize,
    pub pairings_into_empty: Vec<usize>,
    pub newly_blocked: Vec<usize>,
}

impl StepOutcome {
    fn new(chosen_degree: usize, max_degree: usize) -> Self {
        Self {
            chosen_degree,
            non_loop: 0,
            to_blocked: 0,
            pairings_into_empty: vec![0; max_degree + 1],
            newly_blocked: vec![0; max_degree + 1],
        }
    }
}

/// One run from the all-empty state until no empty vertex is left.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub n_vertices: usize,
    pub max_degree: usize,
    /// Snapshots at step 0, every `thin` steps and at absorption.
    pub path: Vec<ChainState>,
    /// `T_N*`, the size of the independent set.
    pub t_star_steps: usize,
    pub independent_set_fraction: f64,
    pub seed: RunSeed,
}

impl RunResult {
    /// Rescaled path as `(t, X_[Nt] / N)` pairs.
    pub fn rescaled_path(&self) -> Vec<(f64, MacroState)> {
        let n = self.n_vertices as f64;
        self.path.iter().map(|s| (s.step() as f64 / n, s.rescaled())).collect()
    }
}

/// Run the exact simulator to absorption.
///
/// `thin = 0` keeps only the first and last states. The leftover blocked
/// half-edges are left unpaired: completing the graph changes neither the
/// chain nor `T_N*`. After absorption the chain is frozen.
pub fn run_to_absorption(seq: &DegreeSequence, seed: RunSeed, thin: usize) -> RunResult {
    let mut rng = seed.rng();
    let mut state = ChainState::initial(seq);
    let mut path = vec![state.clone()];
    let mut chooser = RngChooser(&mut rng);
    while !state.is_absorbed() {
        state
            .advance_exact(&mut chooser)
            .expect("non-absorbed state with even half-edge count always has a transition");
        if thin > 0 && state.step() % thin == 0 && !state.is_absorbed() {
            path.push(state.clone());
        }
    }
    if path.last() != Some(&state) {
        path.push(state.clone());
    }
    RunResult {
        n_vertices: seq.len(),
        max_degree: seq.max_degree(),
        t_star_steps: state.step(),
        independent_set_fraction: state.step() as f64 / seq.len() as f64,
        path,
        seed,
    }
}

/// `T_N*` of one run, without recording a path.
pub fn absorption_time<R: Rng + ?Sized>(seq: &DegreeSequence, rng: &mut R) -> usize {
    let mut state = ChainState::initial(seq);
    let mut chooser = RngChooser(rng);
    while !state.is_absorbed() {
        state
            .advance_exact(&mut chooser)
            .expect("non-absorbed state with even half-edge count always has a transition");
    }
    state.step()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_regular;
    use proptest::prelude::*;

    #[test]
    fn isolated_vertex() {
        let seq = DegreeSequence::new(vec![0], 64).unwrap();
        let state = ChainState::initial(&seq);
        let (next, out) = step_exact(&state, &mut RunSeed::new(1, 0).rng()).unwrap();
        assert_eq!(next.independent(), 1);
        assert_eq!(next.empty_counts(), &[0]);
        assert_eq!(next.unpaired(), 0);
        assert_eq!(out.chosen_degree, 0);
        assert!(step_exact(&next, &mut RunSeed::new(1, 0).rng()).is_err());
    }

    #[test]
    fn forced_pairing() {
        let seq = DegreeSequence::new(vec![1, 1], 64).unwrap();
        let state = ChainState::initial(&seq);
        for sampler in 0..2 {
            let mut rng = RunSeed::new(7, sampler).rng();
            let (next, out) = if sampler == 0 {
                step_exact(&state, &mut rng).unwrap()
            } else {
                step_cascade(&state, &mut rng).unwrap()
            };
            assert_eq!((next.independent(), next.unpaired(), next.blocked()), (1, 0, 1));
            assert_eq!(next.empty_counts(), &[0, 0]);
            assert_eq!((out.chosen_degree, out.non_loop, out.to_blocked), (1, 1, 0));
            assert_eq!(out.pairings_into_empty, vec![0, 1]);
            assert_eq!(out.newly_blocked, vec![0, 1]);
        }
    }

    #[test]
    fn empty_graph_run() {
        let seq = DegreeSequence::new(vec![0; 10], 64).unwrap();
        let run = run_to_absorption(&seq, RunSeed::new(3, 0), 1);
        assert_eq!(run.t_star_steps, 10);
        assert_eq!(run.independent_set_fraction, 1.0);
        assert_eq!(run.path.len(), 11);
    }

    #[test]
    fn runs_are_reproducible() {
        let seq = make_regular(3, 500).unwrap();
        let a = run_to_absorption(&seq, RunSeed::new(11, 4), 10);
        let b = run_to_absorption(&seq, RunSeed::new(11, 4), 10);
        assert_eq!(a.path, b.path);
        let c = run_to_absorption(&seq, RunSeed::new(11, 5), 10);
        assert_eq!(c.seed.stream, 5);
    }

    #[test]
    fn jamming_constants_at_moderate_size() {
        let d3 = make_regular(3, 10_000).unwrap();
        let d2 = make_regular(2, 10_000).unwrap();
        for stream in 0..3 {
            let f3 = run_to_absorption(&d3, RunSeed::new(2024, stream), 0).independent_set_fraction;
            assert!((f3 - 0.375).abs() < 0.02, "d=3 fraction {f3}");
            let f2 = run_to_absorption(&d2, RunSeed::new(2024, stream), 0).independent_set_fraction;
            let expected = (1.0 - (-2.0f64).exp()) / 2.0;
            assert!((f2 - expected).abs() < 0.02, "d=2 fraction {f2}");
        }
    }

    #[test]
    fn lemma_w_first_step_double_hits_are_rare() {
        let seq = make_regular(3, 10_000).unwrap();
        let state = ChainState::initial(&seq);
        let mut rng = RunSeed::new(99, 0).rng();
        let trials = 20_000;
        let differ = (0..trials)
            .filter(|_| {
                let (_, out) = step_exact(&state, &mut rng).unwrap();
                out.newly_blocked != out.pairings_into_empty
            })
            .count();
        assert!((differ as f64) / (trials as f64) < 0.01);
    }

    fn check_invariants(prev: &ChainState, next: &ChainState, out: &StepOutcome) {
        assert_eq!(next.independent(), prev.independent() + 1);
        assert!(next.unpaired() <= prev.unpaired());
        assert_eq!(next.unpaired(), prev.unpaired() - out.chosen_degree - out.non_loop);
        for (a, b) in prev.empty_counts().iter().zip(next.empty_counts()) {
            assert!(b <= a);
        }
        assert_eq!(
            next.independent() + next.blocked() + next.empty_total(),
            next.n_vertices()
        );
        assert!(next.empty_half_edges() <= next.unpaired());
        assert_eq!(next.unpaired() % 2, 0);
        assert!(out.to_blocked <= out.non_loop && out.non_loop <= out.chosen_degree);
        let w: usize = out.pairings_into_empty.iter().sum();
        assert_eq!(w, out.non_loop - out.to_blocked);
        for (wt, w) in out.newly_blocked.iter().zip(&out.pairings_into_empty) {
            assert!(wt <= w);
        }
    }

    proptest! {
        #[test]
        fn monotone_and_conservative(
            degrees in prop::collection::vec(0usize..6, 1..40),
            seed in any::<u64>(),
            use_cascade in any::<bool>(),
        ) {
            let mut degrees = degrees;
            if degrees.iter().sum::<usize>() % 2 == 1 {
                degrees.push(1);
            }
            let seq = DegreeSequence::new(degrees, 64).unwrap();
            let mut rng = RunSeed::new(seed, 0).rng();
            let mut state = ChainState::initial(&seq);
            while !state.is_absorbed() {
                let (next, out) = if use_cascade {
                    step_cascade(&state, &mut rng).unwrap()
                } else {
                    step_exact(&state, &mut rng).unwrap()
                };
                check_invariants(&state, &next, &out);
                state = next;
            }
            prop_assert!(state.step() >= 1 && state.step() <= seq.len());
        }
    }
}

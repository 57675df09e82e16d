//! Exact laws by exhaustive enumeration in rational arithmetic.
//!
//! The exact simulator draws every random quantity through a [`Chooser`];
//! replaying it over all choice sequences yields the one-step kernel with
//! exact weights. The cascade is enumerated independently from its
//! hypergeometric factors.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::dynamics::{ChainState, Chooser, StepOutcome};
use crate::error::{Error, Result};
use crate::model::DegreeSequence;

/// Largest total number of half-edges accepted by [`exact_distribution_tiny`].
pub const MAX_TINY_HALF_EDGES: usize = 12;

/// One-step kernel: `(next state, outcome) ↦ probability`.
pub type Kernel = HashMap<(ChainState, StepOutcome), BigRational>;

fn ratio(num: usize, den: usize) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Replays a fixed prefix of choices, then takes the first admissible one,
/// recording every choice point on the way.
struct Replay {
    script: Vec<usize>,
    trail: Vec<(Vec<u64>, usize)>,
}

impl Chooser for Replay {
    fn choose(&mut self, weights: &[u64]) -> usize {
        let pick = match self.script.get(self.trail.len()) {
            Some(&i) => i,
            None => weights.iter().position(|&w| w > 0).expect("some admissible choice"),
        };
        self.trail.push((weights.to_vec(), pick));
        pick
    }
}

/// Kernel of the literal pairing simulator.
pub fn exact_kernel(state: &ChainState) -> Result<Kernel> {
    let mut kernel = Kernel::new();
    let mut script = Vec::new();
    loop {
        let mut replay = Replay { script, trail: Vec::new() };
        let mut next = state.clone();
        let outcome = next.advance_exact(&mut replay)?;
        let mut p = BigRational::one();
        for (w, pick) in &replay.trail {
            p *= ratio(w[*pick] as usize, w.iter().sum::<u64>() as usize);
        }
        *kernel.entry((next, outcome)).or_insert_with(BigRational::zero) += p;

        // odometer: bump the deepest choice that has an untried sibling
        let mut trail = replay.trail;
        script = loop {
            let Some((w, pick)) = trail.pop() else {
                return Ok(kernel);
            };
            if let Some(alt) = (pick + 1..w.len()).find(|&i| w[i] > 0) {
                break trail.iter().map(|t| t.1).chain(std::iter::once(alt)).collect();
            }
        };
    }
}

fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut c = BigInt::one();
    for i in 0..k {
        c = c * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    c
}

/// `P(X = x)` for `X ~ Hyper(total, successes, draws)`.
fn hypergeometric_pmf(total: usize, successes: usize, draws: usize, x: usize) -> BigRational {
    if x > draws || x > successes || draws - x > total - successes {
        return BigRational::zero();
    }
    BigRational::new(
        binomial(successes, x) * binomial(total - successes, draws - x),
        binomial(total, draws),
    )
}

/// Law of `H` in rationals; mirrors [`crate::dynamics::non_loop_pmf`].
fn non_loop_law(unpaired: usize, k: usize) -> Vec<BigRational> {
    let others = unpaired - k;
    let mut mass = vec![vec![BigRational::zero(); k + 1]; k + 1];
    mass[k][0] = BigRational::one();
    for own in (1..=k).rev() {
        for h in 0..=k {
            if mass[own][h].is_zero() {
                continue;
            }
            let p = mass[own][h].clone();
            let rest = own - 1;
            let free_others = others - h;
            let total = rest + free_others;
            if rest > 0 {
                mass[rest - 1][h] += &p * ratio(rest, total);
            }
            if free_others > 0 {
                mass[rest][h + 1] += &p * ratio(free_others, total);
            }
        }
    }
    mass.swap_remove(0)
}

/// Law of the number of distinct owners among `draws` half-edges taken from
/// `vertices` vertices of degree `degree`.
fn distinct_owner_law(vertices: usize, degree: usize, draws: usize) -> Vec<BigRational> {
    let total = vertices * degree;
    let mut law = vec![BigRational::zero(); draws + 1];
    law[0] = BigRational::one();
    for i in 0..draws {
        let mut next = vec![BigRational::zero(); draws + 1];
        for (owners, p) in law.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let untouched = degree * (vertices - owners);
            if untouched > 0 {
                next[owners + 1] += p * ratio(untouched, total - i);
            }
            if total - i > untouched {
                next[owners] += p * ratio(total - i - untouched, total - i);
            }
        }
        law = next;
    }
    law
}

/// Kernel of the hypergeometric cascade, enumerated factor by factor.
pub fn cascade_kernel(state: &ChainState) -> Result<Kernel> {
    if state.is_absorbed() {
        return Err(Error::Contract("no empty vertex left to select".into()));
    }
    let empty = state.empty_counts();
    let max_degree = state.max_degree();
    let unpaired = state.unpaired();
    let mut kernel = Kernel::new();
    for k in (0..=max_degree).filter(|&k| empty[k] > 0) {
        let pk = ratio(empty[k], state.empty_total());
        let mut rest = empty.to_vec();
        rest[k] -= 1;
        for (h, ph) in non_loop_law(unpaired, k).into_iter().enumerate() {
            if ph.is_zero() {
                continue;
            }
            for b in 0..=h.min(state.blocked_half_edges()) {
                let pb = hypergeometric_pmf(unpaired - k, state.blocked_half_edges(), h, b);
                if pb.is_zero() {
                    continue;
                }
                let mut outcome = StepOutcome {
                    chosen_degree: k,
                    non_loop: h,
                    to_blocked: b,
                    pairings_into_empty: vec![0; max_degree + 1],
                    newly_blocked: vec![0; max_degree + 1],
                };
                let pool: usize = (1..=max_degree).map(|j| j * rest[j]).sum();
                let p = &pk * &ph * pb;
                split_pairings(state, &rest, &mut outcome, 1, pool, h - b, p, &mut kernel)?;
            }
        }
    }
    Ok(kernel)
}

/// Distribute the remaining `left` pairings over degree classes `j..`, then
/// resolve distinct owners per class.
#[allow(clippy::too_many_arguments)]
fn split_pairings(
    state: &ChainState,
    rest: &[usize],
    outcome: &mut StepOutcome,
    j: usize,
    pool: usize,
    left: usize,
    p: BigRational,
    kernel: &mut Kernel,
) -> Result<()> {
    let max_degree = rest.len() - 1;
    if j > max_degree {
        if left == 0 {
            resolve_owners(state, rest, outcome, 1, p, kernel)?;
        }
        return Ok(());
    }
    let class = j * rest[j];
    for w in 0..=left.min(class) {
        let pw = hypergeometric_pmf(pool, class, left, w);
        if pw.is_zero() {
            continue;
        }
        outcome.pairings_into_empty[j] = w;
        split_pairings(state, rest, outcome, j + 1, pool - class, left - w, &p * pw, kernel)?;
    }
    outcome.pairings_into_empty[j] = 0;
    Ok(())
}

fn resolve_owners(
    state: &ChainState,
    rest: &[usize],
    outcome: &mut StepOutcome,
    j: usize,
    p: BigRational,
    kernel: &mut Kernel,
) -> Result<()> {
    let max_degree = rest.len() - 1;
    if j > max_degree {
        let mut empty = rest.to_vec();
        let mut blocked_gain = 0;
        let mut newly = 0;
        for j in 1..=max_degree {
            let wt = outcome.newly_blocked[j];
            empty[j] -= wt;
            newly += wt;
            blocked_gain += j * wt - outcome.pairings_into_empty[j];
        }
        let next = ChainState::from_counts(
            state.independent() + 1,
            state.blocked() + newly,
            state.blocked_half_edges() - outcome.to_blocked + blocked_gain,
            empty,
        )?;
        *kernel.entry((next, outcome.clone())).or_insert_with(BigRational::zero) += p;
        return Ok(());
    }
    let w = outcome.pairings_into_empty[j];
    if w == 0 {
        outcome.newly_blocked[j] = 0;
        return resolve_owners(state, rest, outcome, j + 1, p, kernel);
    }
    for (owners, po) in distinct_owner_law(rest[j], j, w).into_iter().enumerate() {
        if po.is_zero() {
            continue;
        }
        outcome.newly_blocked[j] = owners;
        resolve_owners(state, rest, outcome, j + 1, &p * po, kernel)?;
    }
    outcome.newly_blocked[j] = 0;
    Ok(())
}

/// Exact law of `T_N*` for a sequence with at most [`MAX_TINY_HALF_EDGES`]
/// half-edges.
pub fn exact_distribution_tiny(seq: &DegreeSequence) -> Result<BTreeMap<usize, BigRational>> {
    if seq.total_half_edges() > MAX_TINY_HALF_EDGES {
        return Err(Error::invalid(format!(
            "{} half-edges exceed the enumeration bound of {MAX_TINY_HALF_EDGES}",
            seq.total_half_edges()
        )));
    }
    let mut memo = HashMap::new();
    absorption_law(&ChainState::initial(seq), &mut memo)
}

type Law = BTreeMap<usize, BigRational>;

fn absorption_law(state: &ChainState, memo: &mut HashMap<ChainState, Law>) -> Result<Law> {
    if state.is_absorbed() {
        return Ok(BTreeMap::from([(state.step(), BigRational::one())]));
    }
    if let Some(law) = memo.get(state) {
        return Ok(law.clone());
    }
    let mut next_states: HashMap<ChainState, BigRational> = HashMap::new();
    for ((next, _), p) in exact_kernel(state)? {
        *next_states.entry(next).or_insert_with(BigRational::zero) += p;
    }
    let mut law = Law::new();
    for (next, p) in next_states {
        for (t, q) in absorption_law(&next, memo)? {
            *law.entry(t).or_insert_with(BigRational::zero) += &p * q;
        }
    }
    memo.insert(state.clone(), law.clone());
    Ok(law)
}

/// Floating-point view of an exact law.
pub fn law_to_f64(law: &BTreeMap<usize, BigRational>) -> BTreeMap<usize, f64> {
    law.iter().map(|(&t, p)| (t, p.to_f64().unwrap_or(f64::NAN))).collect()
}

/// Total variation distance between an exact law and empirical counts.
pub fn total_variation(law: &BTreeMap<usize, BigRational>, counts: &BTreeMap<usize, usize>) -> f64 {
    let n: usize = counts.values().sum();
    let exact = law_to_f64(law);
    let mut keys: Vec<usize> = exact.keys().chain(counts.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    0.5 * keys
        .iter()
        .map(|t| {
            let p = exact.get(t).copied().unwrap_or(0.0);
            let q = counts.get(t).copied().unwrap_or(0) as f64 / n as f64;
            (p - q).abs()
        })
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(d: Vec<usize>) -> DegreeSequence {
        DegreeSequence::new(d, 64).unwrap()
    }

    fn total(k: &Kernel) -> BigRational {
        k.values().fold(BigRational::zero(), |a, p| a + p)
    }

    #[test]
    fn trivial_laws() {
        let law = exact_distribution_tiny(&seq(vec![0])).unwrap();
        assert_eq!(law, BTreeMap::from([(1, BigRational::one())]));
        let law = exact_distribution_tiny(&seq(vec![1, 1])).unwrap();
        assert_eq!(law, BTreeMap::from([(1, BigRational::one())]));
        let law = exact_distribution_tiny(&seq(vec![0, 0, 0])).unwrap();
        assert_eq!(law, BTreeMap::from([(3, BigRational::one())]));
    }

    #[test]
    fn triangle_or_loop_pair() {
        // N = 3, d = 2. The first vertex loops with probability 1/5; the
        // second then loops (T = 3) with probability 1/3, else it blocks the
        // third (T = 2). Without a loop the first vertex sends both
        // half-edges to the same neighbour with probability 1/3 (T = 2).
        let law = exact_distribution_tiny(&seq(vec![2, 2, 2])).unwrap();
        let two = law.get(&2).cloned().unwrap_or_else(BigRational::zero);
        let three = law.get(&3).cloned().unwrap_or_else(BigRational::zero);
        let one = law.get(&1).cloned().unwrap_or_else(BigRational::zero);
        assert_eq!(&one + &two + &three, BigRational::one());
        assert_eq!(three, ratio(1, 15));
        assert_eq!(two, ratio(2 + 4, 15));
        assert_eq!(one, ratio(8, 15));
    }

    #[test]
    fn kernels_are_distributions_and_agree() {
        for degrees in [vec![2, 2, 2], vec![3, 3, 3, 3], vec![0, 1, 1, 2], vec![1, 1, 2, 2], vec![2, 2, 2, 2]] {
            let s = ChainState::initial(&seq(degrees.clone()));
            let a = exact_kernel(&s).unwrap();
            let b = cascade_kernel(&s).unwrap();
            assert_eq!(total(&a), BigRational::one());
            assert_eq!(a, b, "{degrees:?}");
        }
    }

    #[test]
    fn kernels_agree_midway() {
        let s = ChainState::from_counts(1, 2, 2, vec![0, 1, 1, 1]).unwrap();
        assert_eq!(exact_kernel(&s).unwrap(), cascade_kernel(&s).unwrap());
    }

    #[test]
    fn enumeration_bound() {
        assert!(exact_distribution_tiny(&seq(vec![3, 3, 3, 3, 2])).is_err());
        assert!(exact_distribution_tiny(&seq(vec![3, 3, 3, 3])).is_ok());
        assert!(exact_distribution_tiny(&seq(vec![4; 4])).is_err());
    }

    #[test]
    fn rational_pmfs_match_floats() {
        let exact = non_loop_law(9, 3);
        let float = crate::dynamics::non_loop_pmf(9, 3);
        for (a, b) in exact.iter().zip(&float) {
            assert!((a.to_f64().unwrap() - b).abs() < 1e-15);
        }
        let s: BigRational = (0..=4).map(|x| hypergeometric_pmf(10, 4, 4, x)).sum();
        assert_eq!(s, BigRational::one());
        let s: BigRational = distinct_owner_law(3, 2, 4).into_iter().sum();
        assert_eq!(s, BigRational::one());
    }
}

//! Replica ensembles of the exact simulator and exact small-instance laws.
//!
//! Replica `i` draws from stream `i` of a ChaCha generator seeded with the
//! master seed, so results do not depend on the thread count.

pub mod oracle;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deviations::Side;
use crate::dynamics::{absorption_time, RunSeed};
use crate::error::{Error, Result};
use crate::model::DegreeSequence;

pub use oracle::{cascade_kernel, exact_distribution_tiny, exact_kernel, total_variation, MAX_TINY_HALF_EDGES};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959963984540054;
/// Below this many hits a tail estimate is flagged as unreliable.
pub const MIN_HITS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub steps: usize,
    pub fraction: f64,
    pub count: usize,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionSummary {
    pub mean: f64,
    /// Unbiased sample variance (0 for a single replica).
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: Vec<HistogramBin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub threshold: f64,
    pub side: Side,
    pub hits: usize,
    pub replicas: usize,
    pub probability: f64,
    /// Wilson score interval at 95%.
    pub ci_low: f64,
    pub ci_high: f64,
    /// No replica hit the event; only the upper bound is informative.
    pub zero_hits: bool,
    /// Fewer than [`MIN_HITS`] hits.
    pub low_hits: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master: u64,
    /// Replica `i` used stream `i` for `i < streams`.
    pub streams: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub n: usize,
    pub replicas: usize,
    pub fractions: FractionSummary,
    pub tail_estimates: Vec<TailEstimate>,
    pub seeds: SeedRecord,
    /// `T_N*` of every replica, by replica index.
    #[serde(skip)]
    pub samples: Vec<usize>,
}

impl EnsembleResult {
    /// Empirical probability that `T_N*/N` is at least (upper) or at most
    /// (lower) `threshold`; also stored in `tail_estimates`.
    pub fn tail(&mut self, threshold: f64, side: Side) -> TailEstimate {
        let n = self.n as f64;
        let hits = self
            .samples
            .iter()
            .filter(|&&t| {
                let f = t as f64 / n;
                match side {
                    Side::Upper => f >= threshold,
                    Side::Lower => f <= threshold,
                }
            })
            .count();
        let (ci_low, ci_high) = wilson(hits, self.replicas);
        let est = TailEstimate {
            threshold,
            side,
            hits,
            replicas: self.replicas,
            probability: hits as f64 / self.replicas as f64,
            ci_low,
            ci_high,
            zero_hits: hits == 0,
            low_hits: hits < MIN_HITS,
        };
        self.tail_estimates.push(est);
        est
    }

    /// Counts of `T_N*` values.
    pub fn counts(&self) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for &t in &self.samples {
            *counts.entry(t).or_insert(0) += 1;
        }
        counts
    }
}

/// Wilson score interval for `hits` successes out of `n` trials.
pub fn wilson(hits: usize, n: usize) -> (f64, f64) {
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = Z95 * Z95;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if hits == 0 { 0.0 } else { (centre - half).clamp(0.0, p) };
    let hi = if hits as f64 == n { 1.0 } else { (centre + half).clamp(p, 1.0) };
    (lo, hi)
}

/// `T_N*` for replicas `0..replicas`, each on its own stream.
pub fn sample_absorption_times(seq: &DegreeSequence, replicas: usize, seed: u64) -> Vec<usize> {
    (0..replicas as u64)
        .into_par_iter()
        .map(|i| absorption_time(seq, &mut RunSeed::new(seed, i).rng()))
        .collect()
}

pub fn ensemble(seq: &DegreeSequence, replicas: usize, seed: u64) -> Result<EnsembleResult> {
    if replicas == 0 {
        return Err(Error::invalid("at least one replica is required"));
    }
    if seq.is_empty() {
        return Err(Error::invalid("degree sequence has no vertices"));
    }
    let samples = sample_absorption_times(seq, replicas, seed);
    let n = seq.len();
    let fractions: Vec<f64> = samples.iter().map(|&t| t as f64 / n as f64).collect();
    let mean = fractions.iter().sum::<f64>() / replicas as f64;
    let variance = if replicas > 1 {
        fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (replicas - 1) as f64
    } else {
        0.0
    };
    let mut result = EnsembleResult {
        n,
        replicas,
        fractions: FractionSummary {
            mean,
            variance,
            min: fractions.iter().cloned().fold(f64::INFINITY, f64::min),
            max: fractions.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            histogram: Vec::new(),
        },
        tail_estimates: Vec::new(),
        seeds: SeedRecord { master: seed, streams: replicas as u64 },
        samples,
    };
    result.fractions.histogram = result
        .counts()
        .into_iter()
        .map(|(steps, count)| HistogramBin {
            steps,
            fraction: steps as f64 / n as f64,
            count,
            probability: count as f64 / replicas as f64,
        })
        .collect();
    Ok(result)
}

pub fn tail_probability(
    seq: &DegreeSequence,
    threshold: f64,
    side: Side,
    replicas: usize,
    seed: u64,
) -> Result<TailEstimate> {
    Ok(ensemble(seq, replicas, seed)?.tail(threshold, side))
}

/// Least-squares slope of `ys` against `xs`.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

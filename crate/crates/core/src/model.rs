//! Degree data and the macroscopic state space.
//!
//! Vectors over the state space use the layout `(s, u, e_0, .., e_D)`, and
//! covectors/velocities share it. `flat()` and `from_flat()` convert to the
//! contiguous form used by the integrators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on the maximum degree.
pub const DEFAULT_DEGREE_CAP: usize = 64;
/// Tolerance for membership in the compact state space.
pub const STATE_TOL: f64 = 1e-9;
/// Tolerance on the normalisation of a degree distribution.
pub const PROB_TOL: f64 = 1e-12;

/// Limiting degree law `(p_0, .., p_D)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution {
    probs: Vec<f64>,
    mean_degree: f64,
}

impl DegreeDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_cap(probs, DEFAULT_DEGREE_CAP)
    }

    pub fn with_cap(probs: Vec<f64>, cap: usize) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("degree distribution is empty"));
        }
        if probs.len() - 1 > cap {
            return Err(Error::invalid(format!(
                "max degree {} exceeds cap {cap}",
                probs.len() - 1
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::invalid(format!("probability {p} is not a finite nonnegative number")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        let mean_degree = probs.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
        Ok(Self { probs, mean_degree })
    }

    /// Point mass at degree `d`.
    pub fn regular(d: usize) -> Result<Self> {
        let mut probs = vec![0.0; d + 1];
        probs[d] = 1.0;
        Self::new(probs)
    }

    /// Empirical law of a degree sequence.
    pub fn from_sequence(seq: &DegreeSequence) -> Self {
        let n = seq.len() as f64;
        let probs: Vec<f64> = seq.counts().iter().map(|&c| c as f64 / n).collect();
        let mean_degree = seq.total_half_edges() as f64 / n;
        Self { probs, mean_degree }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn max_degree(&self) -> usize {
        self.probs.len() - 1
    }

    /// `λ = Σ j p_j`.
    pub fn mean_degree(&self) -> f64 {
        self.mean_degree
    }

    /// `Some(d)` when the law is a point mass at `d`.
    pub fn regular_degree(&self) -> Option<usize> {
        let mut support = self.probs.iter().enumerate().filter(|(_, p)| **p > 0.0);
        match (support.next(), support.next()) {
            (Some((d, p)), None) if (*p - 1.0).abs() <= PROB_TOL => Some(d),
            _ => None,
        }
    }
}

/// Degrees of the `N` vertices of a configuration-model instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeSequence {
    degrees: Vec<usize>,
    max_degree: usize,
}

impl DegreeSequence {
    /// Rejects empty sequences, degrees above `cap` and odd half-edge totals.
    pub fn new(degrees: Vec<usize>, cap: usize) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::invalid("degree sequence is empty"));
        }
        let max_degree = degrees.iter().copied().max().unwrap_or(0);
        if max_degree > cap {
            return Err(Error::invalid(format!("degree {max_degree} exceeds cap {cap}")));
        }
        let total: usize = degrees.iter().sum();
        if total % 2 != 0 {
            return Err(Error::invalid(format!(
                "odd number of half-edges ({total}) cannot be perfectly paired"
            )));
        }
        Ok(Self { degrees, max_degree })
    }

    /// `n` vertices of degree `d`.
    pub fn regular(d: usize, n: usize) -> Result<Self> {
        if d < 2 || d > DEFAULT_DEGREE_CAP {
            return Err(Error::invalid(format!(
                "regular degree must lie in [2, {DEFAULT_DEGREE_CAP}], got {d}"
            )));
        }
        Self::new(vec![d; n], DEFAULT_DEGREE_CAP)
    }

    /// Deterministic sequence with `round(n p_j)` vertices of degree `j`.
    ///
    /// Rounding residue goes to the most likely degree; if the half-edge
    /// total ends up odd one vertex is moved to an adjacent degree.
    pub fn from_distribution(dist: &DegreeDistribution, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("need at least one vertex"));
        }
        let probs = dist.probs();
        let mut counts: Vec<usize> = probs.iter().map(|p| (p * n as f64).round() as usize).collect();
        let mode = (0..probs.len())
            .max_by(|&a, &b| probs[a].total_cmp(&probs[b]))
            .unwrap_or(0);
        let assigned: usize = counts.iter().sum();
        if assigned > n {
            counts[mode] -= (assigned - n).min(counts[mode]);
        } else {
            counts[mode] += n - assigned;
        }
        let total: usize = counts.iter().enumerate().map(|(j, c)| j * c).sum();
        if total % 2 == 1 {
            // Move one odd-degree vertex to a neighbouring degree.
            let j = (1..counts.len())
                .step_by(2)
                .filter(|&j| counts[j] > 0)
                .max_by_key(|&j| counts[j])
                .ok_or_else(|| Error::invalid("cannot repair half-edge parity"))?;
            counts[j] -= 1;
            if j + 1 < counts.len() {
                counts[j + 1] += 1;
            } else {
                counts[j - 1] += 1;
            }
        }
        let degrees = counts
            .iter()
            .enumerate()
            .flat_map(|(j, &c)| std::iter::repeat(j).take(c))
            .collect();
        Self::new(degrees, dist.max_degree().max(DEFAULT_DEGREE_CAP))
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn total_half_edges(&self) -> usize {
        self.degrees.iter().sum()
    }

    /// Number of vertices of each degree `0..=max_degree`.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.max_degree + 1];
        for &d in &self.degrees {
            counts[d] += 1;
        }
        counts
    }
}

/// Check `(d, N)` and build the regular sequence.
pub fn make_regular(d: usize, n: usize) -> Result<DegreeSequence> {
    DegreeSequence::regular(d, n)
}

macro_rules! phase_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        pub struct $name {
            pub s: f64,
            pub u: f64,
            pub e: Vec<f64>,
        }

        impl $name {
            pub fn new(s: f64, u: f64, e: Vec<f64>) -> Self {
                Self { s, u, e }
            }

            pub fn zeros(max_degree: usize) -> Self {
                Self { s: 0.0, u: 0.0, e: vec![0.0; max_degree + 1] }
            }

            pub fn max_degree(&self) -> usize {
                self.e.len().saturating_sub(1)
            }

            /// Total number of coordinates, `D + 3`.
            pub fn dim(&self) -> usize {
                self.e.len() + 2
            }

            pub fn flat(&self) -> Vec<f64> {
                let mut v = Vec::with_capacity(self.dim());
                v.push(self.s);
                v.push(self.u);
                v.extend_from_slice(&self.e);
                v
            }

            pub fn from_flat(v: &[f64]) -> Self {
                assert!(v.len() >= 3, "flat vector needs at least 3 coordinates");
                Self { s: v[0], u: v[1], e: v[2..].to_vec() }
            }

            pub fn is_finite(&self) -> bool {
                self.s.is_finite() && self.u.is_finite() && self.e.iter().all(|x| x.is_finite())
            }

            pub fn dot(&self, other: &[f64]) -> f64 {
                self.flat().iter().zip(other).map(|(a, b)| a * b).sum()
            }
        }
    };
}

phase_vector!(
    /// Point `(s, u, e_0, .., e_D)` of the rescaled chain.
    MacroState
);
phase_vector!(
    /// Dual variable `(α_s, α_u, α_0, .., α_D)`.
    Covector
);
phase_vector!(
    /// Velocity `(β_s, β_u, β_0, .., β_D)`.
    Velocity
);

impl MacroState {
    /// `Σ_j e_j`.
    pub fn empty_mass(&self) -> f64 {
        self.e.iter().sum()
    }

    /// `Σ_j j e_j`, the mass of half-edges on empty vertices.
    pub fn empty_half_edges(&self) -> f64 {
        self.e.iter().enumerate().map(|(j, e)| j as f64 * e).sum()
    }
}

/// Starting point `(0, λ, p_0, .., p_D)`.
pub fn initial_macrostate(dist: &DegreeDistribution) -> MacroState {
    MacroState::new(0.0, dist.mean_degree(), dist.probs().to_vec())
}

/// Membership in the compact state space with the default tolerance.
pub fn validate_in_e(x: &MacroState, lambda: f64) -> bool {
    in_state_space(x, lambda, STATE_TOL)
}

/// `s ∈ [0,1]`, `e_j ∈ [0,1]` and `Σ j e_j ≤ u ≤ λ`, each up to `tol`.
pub fn in_state_space(x: &MacroState, lambda: f64, tol: f64) -> bool {
    x.is_finite()
        && (-tol..=1.0 + tol).contains(&x.s)
        && x.e.iter().all(|e| (-tol..=1.0 + tol).contains(e))
        && x.empty_half_edges() <= x.u + tol
        && x.u <= lambda + tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_sequences() {
        assert_eq!(make_regular(3, 4).unwrap().degrees(), &[3, 3, 3, 3]);
        assert_eq!(make_regular(2, 3).unwrap().degrees(), &[2, 2, 2]);
        assert!(matches!(make_regular(3, 5), Err(Error::InvalidInput(_))));
        assert!(make_regular(1, 4).is_err());
    }

    #[test]
    fn regular_sequence_frequencies_are_point_mass() {
        let seq = make_regular(5, 10).unwrap();
        let dist = DegreeDistribution::from_sequence(&seq);
        assert_eq!(dist, DegreeDistribution::regular(5).unwrap());
        assert_eq!(dist.regular_degree(), Some(5));
    }

    #[test]
    fn initial_states() {
        let x = initial_macrostate(&DegreeDistribution::regular(3).unwrap());
        assert_eq!((x.s, x.u), (0.0, 3.0));
        assert_eq!(x.e, vec![0.0, 0.0, 0.0, 1.0]);

        let x = initial_macrostate(&DegreeDistribution::new(vec![1.0]).unwrap());
        assert_eq!((x.s, x.u, x.e.clone()), (0.0, 0.0, vec![1.0]));

        let dist = DegreeDistribution::new(vec![0.0, 0.5, 0.5]).unwrap();
        let x = initial_macrostate(&dist);
        assert_eq!((x.s, x.u, x.e.clone()), (0.0, 1.5, vec![0.0, 0.5, 0.5]));
        assert!(validate_in_e(&x, dist.mean_degree()));
    }

    #[test]
    fn state_space_membership() {
        let e3 = vec![0.0, 0.0, 0.0, 1.0];
        assert!(validate_in_e(&MacroState::new(0.0, 3.0, e3.clone()), 3.0));
        assert!(!validate_in_e(&MacroState::new(0.0, 2.0, e3.clone()), 3.0));
        assert!(!validate_in_e(&MacroState::new(0.0, 4.0, e3), 3.0));
    }

    #[test]
    fn distribution_validation() {
        assert!(DegreeDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(DegreeDistribution::new(vec![-0.5, 1.5]).is_err());
        assert!(DegreeDistribution::new(vec![]).is_err());
        assert!(DegreeDistribution::with_cap(vec![0.0, 0.0, 1.0], 1).is_err());
        // trailing zeros are allowed
        let d = DegreeDistribution::new(vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(d.max_degree(), 3);
        assert_eq!(d.mean_degree(), 2.0);
    }

    #[test]
    fn sequence_from_distribution_is_even() {
        let dist = DegreeDistribution::new(vec![0.1, 0.3, 0.3, 0.3]).unwrap();
        for n in [7, 10, 101, 1000] {
            let seq = DegreeSequence::from_distribution(&dist, n).unwrap();
            assert_eq!(seq.len(), n);
            assert_eq!(seq.total_half_edges() % 2, 0);
        }
    }

    #[test]
    fn flat_layout() {
        let c = Covector::new(1.0, 2.0, vec![3.0, 4.0]);
        assert_eq!(c.flat(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(Covector::from_flat(&c.flat()), c);
        assert_eq!(c.dim(), 4);
    }
}

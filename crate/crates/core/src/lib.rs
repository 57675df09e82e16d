//! Large deviations of the greedy independent set on random graphs with a
//! prescribed degree sequence.
//!
//! The crate covers the exact Markov chain on configuration-model graphs,
//! its fluid limit, the limiting Hamiltonian and its Legendre transform,
//! Hamilton's equations for optimal paths, and Monte Carlo estimators.

pub mod deviations;
pub mod dynamics;
pub mod error;
pub mod hamiltonian;
pub mod io;
pub mod legendre;
pub mod model;
pub mod montecarlo;
pub mod odeflow;
pub mod validation;

pub use error::{Error, Result};
pub use model::{Covector, DegreeDistribution, DegreeSequence, MacroState, Velocity};

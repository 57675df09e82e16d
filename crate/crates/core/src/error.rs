use thiserror::Error;

/// Errors produced by the simulation and analytics routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input rejected at construction or as a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An operation was called in a state where its contract does not hold.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The inner base of the Hamiltonian log is non-positive.
    #[error("domain error: log argument {base:e} is not positive")]
    Domain { base: f64 },

    /// Iterative solver failed to converge.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Vanishing denominator in the reduced Hamiltonian system.
    #[error("singularity at t = {t}: {detail}")]
    Singularity { t: f64, detail: String },

    /// An integrated path left the state space.
    #[error("trajectory left the state space at t = {t}: {detail}")]
    LeftStateSpace { t: f64, detail: String },

    /// A root search could not bracket its target.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// No candidate satisfied the constraint; the rate is +inf.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

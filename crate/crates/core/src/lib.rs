//! Transient distributions and parameter derivatives for continuous-time
//! Markov chains whose generators are short sums of Kronecker products.
//!
//! The crate is organized bottom-up:
//!
//! * [`kronop`]: band matrices and matrix-free Kronecker-sum operators.
//! * [`unif`]: uniformization for `exp(tQ) p0` and differentiated
//!   uniformization for its derivative with respect to model parameters.
//! * [`sir`]: the stochastic SIR generator on full and restricted state
//!   spaces, plus the deterministic SIR reference solver.
//! * [`predprey`]: a stochastic predator–prey generator.
//! * [`ssa`]: exact Gillespie simulation of both models.
//! * [`infer`]: log-likelihood with gradient, MAP fitting and HMC.

pub mod infer;
pub mod kronop;
pub mod predprey;
pub mod sir;
pub mod ssa;
pub mod unif;

use kronop::Band;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{band:?} band of dimension {dim} needs {expected} entries, got {got}")]
    BandLength { dim: usize, band: Band, expected: usize, got: usize },

    #[error("vector length {got} does not match operator dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid shape {got:?} does not match {expected:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid transition {from:?} -> {to:?}: {reason}")]
    InvalidTransition { from: (u64, u64), to: (u64, u64), reason: &'static str },

    #[error("invalid observation {index}: {reason}")]
    InvalidData { index: usize, reason: String },

    #[error("non-finite value at iteration {iteration} of the uniformization series")]
    NumericalFailure { iteration: usize },

    #[error("optimizer did not converge (residual {residual:.6e} after {iterations} iterations)")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("log-likelihood is -inf everywhere that was tried; check the data")]
    ZeroLikelihood,

    #[error("too few samples: {0}")]
    TooFewSamples(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[cfg(test)]
#[path = "../tests/common/oracle.rs"]
pub(crate) mod oracle;

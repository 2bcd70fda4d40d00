//! Error type shared by every module in the crate.
//!
//! The variants are grouped by how a caller is expected to react: bad inputs
//! and precondition violations, capacity limits of the exact algorithms,
//! sampling starvation, and optimiser non-convergence. The CLI maps each
//! group to a distinct process exit code.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition
    /// (dimension mismatch, out-of-range parameter, malformed artifact, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An exact integer count does not fit in the 128-bit accumulator.
    #[error("integer overflow: {0}")]
    Overflow(String),

    /// A matrix that must be unitary is not, within the stated tolerance.
    #[error("matrix is not unitary (max deviation {deviation:.3e} > tolerance {tolerance:.1e})")]
    NotUnitary { deviation: f64, tolerance: f64 },

    /// The requested exact computation exceeds a hard practical limit.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A conditional sampling loop exhausted its attempt budget without
    /// observing the required outcome.
    #[error("outcome starvation: required outcome not observed within {attempts} runs")]
    Starvation { attempts: u64 },

    /// An outcome that must be post-selected on has exactly zero probability.
    #[error("unreachable outcome: {0}")]
    UnreachableOutcome(String),

    /// An iterative solver stopped at its iteration cap without meeting its
    /// convergence tolerance.
    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: u64 },

    /// A Gram-matrix entry failed; carries the entry indices for diagnosis.
    #[error("gram entry ({row},{col}) failed: {source}")]
    GramEntry {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Convenience constructor for [`Error::InvalidInput`].
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by constructors and operations.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Two objects that must share a dimension do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A block index outside `0..N`.
    #[error("invalid block index {index}: decomposition has {blocks} blocks")]
    InvalidBlockIndex { index: usize, blocks: usize },

    /// A state vector whose squared norm deviates from 1 beyond tolerance.
    #[error("state is not normalized: |sum |c|^2 - 1| = {0:.3e}")]
    NotNormalized(f64),

    /// A matrix that fails the unitarity check.
    #[error("matrix is not unitary: max |U U^dag - I| entry = {0:.3e}")]
    NotUnitary(f64),

    /// An operation that requires a non-degenerate spectrum was given a
    /// degenerate one.
    #[error("spectrum is degenerate: occupation time average is undefined")]
    DegenerateSpectrum,

    /// An operation that requires a resonance-free spectrum was given a
    /// resonant one.
    #[error("spectrum has resonances: the closed-form time average does not apply")]
    ResonantSpectrum,

    /// Retry budget exhausted while generating a valid spectrum.
    #[error("spectrum generation failed after {0} attempts")]
    GenerationFailed(usize),

    /// Any other violated precondition; the message names the offending
    /// argument or config field.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Numerical laboratory for normal typicality in closed quantum systems.
//!
//! A finite-dimensional system is described by an energy spectrum, an initial
//! state in the energy eigenbasis, and an orthogonal decomposition of the
//! space into macro-spaces. This crate computes the exact time-averaged
//! occupation deviations of such systems, samples decompositions/states/
//! Hamiltonians from the uniform (Haar) measures, checks normality bounds,
//! and runs the reproducible Monte Carlo experiments that probe how typical
//! normal behavior is — including the quantifier-order distinction between
//! "good for one fixed state" and "good for every state".
//!
//! Modules follow the pipeline:
//!
//! * [`hilbert`] — domain types and exact state/projector computations,
//! * [`sampling`] — seeded uniform sampling and exact overlap statistics,
//! * [`spectra`] — degeneracy/resonance analysis and time horizons,
//! * [`normality`] — the deviation functional, bounds, and worst-case search,
//! * [`typicality`] — Monte Carlo experiment runners.

pub mod error;
pub mod hilbert;
pub mod normality;
pub mod sampling;
pub mod spectra;
pub mod typicality;

pub use error::{Error, Result};
pub use hilbert::{
    all_projector_overlaps, build_projector_overlaps, effective_dimension,
    macro_occupation_at_time, time_averaged_occupation, EnergySpectrum, MacroDecomposition,
    ProjectorOverlaps, StateVector, UnitaryMatrix,
};
pub use normality::{
    condition_value, deviation_g, deviation_g_empirical, macro_observable_deviation,
    normality_bounds, normality_report, time_fraction_normal, worst_case_g, NormalityParams,
    NormalityReport, NormalitySense,
};
pub use sampling::{
    conjugated_hamiltonian, haar_unitary, overlap_statistics, uniform_decomposition,
    uniform_state, SeedSpec,
};
pub use spectra::{check_spectrum, generate_nonresonant_spectrum, time_horizon, SpectrumReport};
pub use typicality::{
    run_experiment, wilson_interval, ExperimentConfig, ExperimentOutput, QuantifierContrastReport,
    TypicalityEstimate, Variant,
};

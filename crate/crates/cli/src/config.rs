//! Config-file schema: a tagged task plus instance specs for building
//! spectra, decompositions, and states from JSON.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use ntlab_core::hilbert::{EnergySpectrum, MacroDecomposition, StateVector, UnitaryMatrix};
use ntlab_core::sampling::{uniform_decomposition, uniform_state, SeedSpec};
use ntlab_core::spectra::generate_nonresonant_spectrum;
use ntlab_core::typicality::{ExperimentConfig, ParamsSpec, SpectrumSource};
use ntlab_core::{Error, Result};

/// Top-level config: `{"task": "experiment" | "normality" | "trace", ...}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum TaskConfig {
    Experiment(ExperimentConfig),
    Normality(NormalityRequest),
    Trace(TraceRequest),
}

impl TaskConfig {
    pub fn master_seed_mut(&mut self) -> &mut u64 {
        match self {
            TaskConfig::Experiment(c) => &mut c.seed.master_seed,
            TaskConfig::Normality(c) => &mut c.seed.master_seed,
            TaskConfig::Trace(c) => &mut c.seed.master_seed,
        }
    }
}

/// How the decomposition of a concrete instance is built.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompositionSpec {
    /// Haar alignment drawn from the request seed.
    Uniform,
    /// Alignment = identity (macro basis = energy eigenbasis).
    Aligned,
    /// Explicit alignment matrix, entries as `[re, im]` pairs, row
    /// `gamma` holding the macro basis vector's coefficients.
    Explicit { alignment: Vec<Vec<[f64; 2]>> },
}

/// How the initial state is built.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSpec {
    /// Uniform on the unit sphere, drawn from the request seed.
    Uniform,
    /// The energy eigenstate with the given index.
    Eigenstate { index: usize },
    /// Explicit coefficients as `[re, im]` pairs.
    Explicit { coeffs: Vec<[f64; 2]> },
}

/// Per-instance normality report request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalityRequest {
    pub dimension: usize,
    pub dims: Vec<usize>,
    #[serde(default)]
    pub spectrum: SpectrumSource,
    #[serde(default = "default_decomposition")]
    pub decomposition: DecompositionSpec,
    #[serde(default = "default_state")]
    pub state: StateSpec,
    #[serde(default)]
    pub params: ParamsSpec,
    pub seed: SeedSpec,
    #[serde(default = "default_cycles")]
    pub cycles: u32,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    /// Also measure the per-block time fractions (not just the bounds).
    #[serde(default = "default_true")]
    pub compute_time_fraction: bool,
    /// Re-measure at a doubled horizon; a drift above 0.01 is warned about.
    #[serde(default = "default_true")]
    pub convergence_check: bool,
}

/// Occupation-trace request: plot-ready per-time occupations plus the
/// tolerance bands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRequest {
    pub dimension: usize,
    pub dims: Vec<usize>,
    #[serde(default)]
    pub spectrum: SpectrumSource,
    #[serde(default = "default_decomposition")]
    pub decomposition: DecompositionSpec,
    #[serde(default = "default_state")]
    pub state: StateSpec,
    #[serde(default)]
    pub params: ParamsSpec,
    pub seed: SeedSpec,
    #[serde(default = "default_cycles")]
    pub cycles: u32,
    pub n_samples: usize,
    /// Explicit end of the time window; defaults to the occupation horizon.
    #[serde(default)]
    pub t_max: Option<f64>,
}

fn default_decomposition() -> DecompositionSpec {
    DecompositionSpec::Uniform
}

fn default_state() -> StateSpec {
    StateSpec::Uniform
}

fn default_cycles() -> u32 {
    ntlab_core::spectra::DEFAULT_HORIZON_CYCLES
}

fn default_n_samples() -> usize {
    4096
}

fn default_true() -> bool {
    true
}

/// A fully built instance: spectrum, decomposition, state.
pub struct Instance {
    pub spectrum: EnergySpectrum,
    pub decomposition: MacroDecomposition,
    pub state: StateVector,
}

/// Reserved global seed slots: 0 = spectrum, 1 = decomposition, 2 = state,
/// 3 = time-grid jitter.
pub fn build_instance(
    dimension: usize,
    dims: &[usize],
    spectrum: &SpectrumSource,
    decomposition: &DecompositionSpec,
    state: &StateSpec,
    seed: SeedSpec,
) -> Result<Instance> {
    if dims.iter().sum::<usize>() != dimension {
        return Err(Error::InvalidArgument(format!(
            "dims: sum {} does not match dimension {}",
            dims.iter().sum::<usize>(),
            dimension
        )));
    }
    let spectrum = match spectrum {
        SpectrumSource::Generate { span } => {
            generate_nonresonant_spectrum(dimension, seed.global(0), *span)?
        }
        SpectrumSource::Explicit {
            energies,
            degeneracy_tol,
            resonance_tol,
        } => {
            if energies.len() != dimension {
                return Err(Error::InvalidArgument(format!(
                    "spectrum: {} energies for dimension {}",
                    energies.len(),
                    dimension
                )));
            }
            match (degeneracy_tol, resonance_tol) {
                (None, None) => EnergySpectrum::with_default_tolerances(energies.clone())?,
                (d, r) => {
                    let span = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                        - energies.iter().cloned().fold(f64::INFINITY, f64::min);
                    let fallback = EnergySpectrum::DEFAULT_TOL_FACTOR * span;
                    EnergySpectrum::new(
                        energies.clone(),
                        d.unwrap_or(fallback),
                        r.unwrap_or(fallback),
                    )?
                }
            }
        }
    };

    let decomposition = match decomposition {
        DecompositionSpec::Uniform => uniform_decomposition(dims, seed.global(1))?,
        DecompositionSpec::Aligned => MacroDecomposition::aligned(dims.to_vec())?,
        DecompositionSpec::Explicit { alignment } => {
            let matrix = complex_matrix(alignment)?;
            MacroDecomposition::new(dims.to_vec(), UnitaryMatrix::new(matrix)?)?
        }
    };

    let state = match state {
        StateSpec::Uniform => uniform_state(dimension, seed.global(2))?,
        StateSpec::Eigenstate { index } => StateVector::eigenstate(dimension, *index)?,
        StateSpec::Explicit { coeffs } => StateVector::new(
            coeffs
                .iter()
                .map(|&[re, im]| Complex64::new(re, im))
                .collect(),
        )?,
    };
    if state.dim() != dimension {
        return Err(Error::InvalidArgument(format!(
            "state: {} coefficients for dimension {}",
            state.dim(),
            dimension
        )));
    }

    Ok(Instance {
        spectrum,
        decomposition,
        state,
    })
}

fn complex_matrix(rows: &[Vec<[f64; 2]>]) -> Result<Array2<Complex64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument(
            "alignment: must be a square non-empty matrix".into(),
        ));
    }
    let data: Vec<Complex64> = rows
        .iter()
        .flat_map(|r| r.iter().map(|&[re, im]| Complex64::new(re, im)))
        .collect();
    Ok(Array2::from_shape_vec((n, n), data).expect("square shape"))
}

//! Monte Carlo experiments over random decompositions and random
//! Hamiltonians: exact-statistics checks for uniform-state overlaps,
//! empirical verification of the max-overlap concentration bounds,
//! desk-scale condition-typicality runs, the equilibrium experiment, and the
//! quantifier-order contrast.
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]: trial `k`
//! draws from stream `k` of the config seed, global draws use streams counted
//! down from `u64::MAX`, trials run in parallel, and aggregation happens in
//! fixed trial order, so results are independent of the worker count.

use std::collections::BTreeMap;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::hilbert::{projector_from_factor, EnergySpectrum, MacroDecomposition, StateVector};
use crate::normality::{
    condition_value, deviation_g_factored, normality_bounds, worst_case_g, NormalityParams,
    NormalitySense,
};
use crate::sampling::{
    haar_unitary_with_rng, overlap_statistics, stiefel_rows_with_rng, uniform_closed_open,
    uniform_state_with_rng, SeedSpec,
};
use crate::spectra::{generate_nonresonant_spectrum, occupation_horizon};

/// Which experiment a config requests. The serialized names are the stable
/// on-disk vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Monte Carlo check of the exact uniform-overlap mean/variance.
    #[serde(rename = "lemma1")]
    UniformOverlap,
    /// Empirical means and tails of the two max-overlap statistics.
    #[serde(rename = "lemma_bounds")]
    MaxOverlapBounds,
    /// Random decompositions against `bound1` (von Neumann sense).
    #[serde(rename = "theorem1")]
    RandomDecomposition,
    /// Random decompositions against `bound2` (strong sense).
    #[serde(rename = "theorem2")]
    RandomDecompositionStrong,
    /// Random Hamiltonian eigenbasis, fixed decomposition, against `bound2`.
    #[serde(rename = "theorem3")]
    RandomHamiltonian,
    /// Thermal-equilibrium macro-state occupation for probe states.
    #[serde(rename = "equilibrium")]
    Equilibrium,
    /// Fixed-state versus all-states quantifier contrast.
    #[serde(rename = "quantifier_contrast")]
    QuantifierContrast,
}

/// Where the trial spectrum comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    Generate {
        span: f64,
    },
    Explicit {
        energies: Vec<f64>,
        #[serde(default)]
        degeneracy_tol: Option<f64>,
        #[serde(default)]
        resonance_tol: Option<f64>,
    },
}

impl Default for SpectrumSource {
    fn default() -> Self {
        SpectrumSource::Generate { span: 100.0 }
    }
}

/// Configurable constants of the concentration bounds. `c1` is unknown in
/// closed form (default 1, see the hypothesis annotations); `c2 = 121` is
/// the smallest value for which the tail-bound derivation goes through.
/// `a` is the tail threshold; when absent it defaults to `bound2 / 2`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Constants {
    #[serde(default = "default_c1")]
    pub c1: f64,
    #[serde(default = "default_c2")]
    pub c2: f64,
    #[serde(default)]
    pub a: Option<f64>,
}

fn default_c1() -> f64 {
    1.0
}

fn default_c2() -> f64 {
    121.0
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 121.0,
            a: None,
        }
    }
}

/// Normality tolerances as they appear in config files; the block count is
/// always taken from `dims`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParamsSpec {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta_prime")]
    pub delta_prime: f64,
    #[serde(default = "default_sense")]
    pub sense: NormalitySense,
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_delta_prime() -> f64 {
    0.1
}

fn default_sense() -> NormalitySense {
    NormalitySense::Strong
}

impl Default for ParamsSpec {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            delta_prime: 0.1,
            sense: NormalitySense::Strong,
        }
    }
}

impl ParamsSpec {
    pub fn to_params(self, blocks: usize) -> Result<NormalityParams> {
        NormalityParams::new(self.epsilon, self.delta_prime, blocks, self.sense)
    }
}

/// Full description of one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub variant: Variant,
    /// Total dimension `D`.
    pub dimension: usize,
    /// Block dimensions `d_nu`; must sum to `dimension`.
    pub dims: Vec<usize>,
    #[serde(default)]
    pub spectrum: SpectrumSource,
    #[serde(default)]
    pub params: ParamsSpec,
    /// Typicality level `delta` for hypothesis annotations.
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub trials: usize,
    pub seed: SeedSpec,
    #[serde(default)]
    pub constants: Constants,
    /// Number of time samples for dynamic probes.
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    /// Averaging horizon in cycles of the smallest frequency gap.
    #[serde(default = "default_cycles")]
    pub cycles: u32,
    /// Uniform probe states per trial where probes are used.
    #[serde(default = "default_probe_states")]
    pub probe_uniform_states: usize,
    /// Keep per-trial records in the estimate.
    #[serde(default)]
    pub record_trials: bool,
    /// Replaces the per-block success threshold in condition-typicality
    /// runs (diagnostic mode for dimensions where the true bounds are out
    /// of reach).
    #[serde(default)]
    pub threshold_override: Option<f64>,
    /// Monte Carlo pairs for the expectation estimates of the quantifier
    /// contrast.
    #[serde(default = "default_mc_pairs")]
    pub mc_pairs: usize,
    /// Multi-start budget of the worst-case search.
    #[serde(default = "default_optimizer_starts")]
    pub optimizer_starts: usize,
}

fn default_delta() -> f64 {
    0.1
}

fn default_n_samples() -> usize {
    4096
}

fn default_cycles() -> u32 {
    crate::spectra::DEFAULT_HORIZON_CYCLES
}

fn default_probe_states() -> usize {
    16
}

fn default_mc_pairs() -> usize {
    10_000
}

fn default_optimizer_starts() -> usize {
    crate::normality::WORST_CASE_DEFAULT_STARTS
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(Error::InvalidArgument(
                "dimension: must be at least 2".into(),
            ));
        }
        if self.dims.is_empty() || self.dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(
                "dims: every block dimension must be positive".into(),
            ));
        }
        let total: usize = self.dims.iter().sum();
        if total != self.dimension {
            return Err(Error::InvalidArgument(format!(
                "dims: sum {} does not match dimension {}",
                total, self.dimension
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials: must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument("delta: must lie in (0, 1)".into()));
        }
        Ok(())
    }

    fn resolve_spectrum(&self) -> Result<EnergySpectrum> {
        match &self.spectrum {
            SpectrumSource::Generate { span } => {
                generate_nonresonant_spectrum(self.dimension, self.seed.global(0), *span)
            }
            SpectrumSource::Explicit {
                energies,
                degeneracy_tol,
                resonance_tol,
            } => {
                if energies.len() != self.dimension {
                    return Err(Error::InvalidArgument(format!(
                        "spectrum: {} energies for dimension {}",
                        energies.len(),
                        self.dimension
                    )));
                }
                match (degeneracy_tol, resonance_tol) {
                    (Some(d), Some(r)) => EnergySpectrum::new(energies.clone(), *d, *r),
                    (None, None) => EnergySpectrum::with_default_tolerances(energies.clone()),
                    (d, r) => {
                        let span = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                            - energies.iter().cloned().fold(f64::INFINITY, f64::min);
                        let fallback = EnergySpectrum::DEFAULT_TOL_FACTOR * span;
                        EnergySpectrum::new(
                            energies.clone(),
                            d.unwrap_or(fallback),
                            r.unwrap_or(fallback),
                        )
                    }
                }
            }
        }
    }
}

/// One trial's numbers, kept when `record_trials` is set.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub values: Vec<f64>,
    pub success: bool,
}

/// Aggregated outcome of a Monte Carlo experiment.
#[derive(Debug, Clone, Serialize)]
pub struct TypicalityEstimate {
    pub variant: Variant,
    pub trials: usize,
    pub success_fraction: f64,
    /// Wilson score interval at 95%.
    pub confidence_interval: (f64, f64),
    /// Named hypothesis inequalities; failures annotate, they never block.
    pub hypothesis_check: BTreeMap<String, bool>,
    /// Variant-specific scalars (exact values, empirical means, bounds).
    pub details: BTreeMap<String, f64>,
    /// Column labels for `per_trial_records[i].values`.
    pub trial_value_labels: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_trial_records: Option<Vec<TrialRecord>>,
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials: must be positive".into()));
    }
    if successes > trials {
        return Err(Error::InvalidArgument(format!(
            "successes {successes} exceed trials {trials}"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidArgument(
            "confidence must lie in (0, 1)".into(),
        ));
    }
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(0.5 * (1.0 + confidence));
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Ok(((center - half).max(0.0), (center + half).min(1.0)))
}

fn estimate_skeleton(config: &ExperimentConfig, successes: usize) -> Result<TypicalityEstimate> {
    let ci = wilson_interval(successes, config.trials, 0.95)?;
    Ok(TypicalityEstimate {
        variant: config.variant,
        trials: config.trials,
        success_fraction: successes as f64 / config.trials as f64,
        confidence_interval: ci,
        hypothesis_check: BTreeMap::new(),
        details: BTreeMap::new(),
        trial_value_labels: Vec::new(),
        per_trial_records: None,
    })
}

fn records_from(
    config: &ExperimentConfig,
    rows: Vec<(Vec<f64>, bool)>,
) -> Option<Vec<TrialRecord>> {
    if !config.record_trials {
        return None;
    }
    Some(
        rows.into_iter()
            .enumerate()
            .map(|(trial, (values, success))| TrialRecord {
                trial,
                values,
                success,
            })
            .collect(),
    )
}

// ---------------------------------------------------------------------------
// Uniform-overlap exactness (variant "lemma1")
// ---------------------------------------------------------------------------

/// Monte Carlo check of the exact uniform-state overlap statistics for the
/// fixed first block: draws `trials` uniform states, compares empirical mean
/// and variance of `||P_1 phi||^2` against the exact values, and counts the
/// concentration events `| overlap - d/D | < eps * d/D`.
pub fn run_uniform_overlap_experiment(config: &ExperimentConfig) -> Result<TypicalityEstimate> {
    config.validate()?;
    let d = config.dims[0];
    let dim = config.dimension;
    let eps = config.params.epsilon;
    let exact = overlap_statistics(d, dim, eps)?;
    let q = exact.mean;

    let rows: Vec<(Vec<f64>, bool)> = (0..config.trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = config.seed.stream(k as u64).rng();
            let state = uniform_state_with_rng(dim, &mut rng).expect("dim >= 2");
            let overlap: f64 = state.coeffs()[..d].iter().map(|c| c.norm_sqr()).sum();
            let success = (overlap - q).abs() < eps * q;
            (vec![overlap], success)
        })
        .collect();

    let n = config.trials as f64;
    let successes = rows.iter().filter(|(_, s)| *s).count();
    let mean = rows.iter().map(|(v, _)| v[0]).sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for (v, _) in &rows {
        let dev = v[0] - mean;
        m2 += dev * dev;
        m4 += dev.powi(4);
    }
    let variance = if config.trials > 1 { m2 / (n - 1.0) } else { 0.0 };
    m2 /= n;
    m4 /= n;

    let se_mean = (exact.variance / n).sqrt();
    let mean_z = if se_mean > 0.0 {
        (mean - exact.mean).abs() / se_mean
    } else {
        0.0
    };
    // standard error of the sample variance from the empirical fourth moment
    let se_var = ((m4 - m2 * m2).max(0.0) / n).sqrt();
    let var_z = if se_var > 0.0 {
        (variance - exact.variance).abs() / se_var
    } else {
        0.0
    };

    let mut est = estimate_skeleton(config, successes)?;
    est.details.insert("exact_mean".into(), exact.mean);
    est.details.insert("exact_variance".into(), exact.variance);
    est.details
        .insert("chebyshev_lower_bound".into(), exact.chebyshev_lower_bound);
    est.details.insert("mc_mean".into(), mean);
    est.details.insert("mc_variance".into(), variance);
    est.details.insert("mean_z_score".into(), mean_z);
    est.details.insert("variance_z_score".into(), var_z);
    est.hypothesis_check
        .insert("mean_within_5_se".into(), mean_z < 5.0);
    est.hypothesis_check
        .insert("variance_within_5_se".into(), var_z < 5.0);
    est.hypothesis_check.insert(
        "chebyshev_bound_holds".into(),
        est.success_fraction >= exact.chebyshev_lower_bound,
    );
    est.trial_value_labels = vec!["overlap".into()];
    est.per_trial_records = records_from(config, rows);
    Ok(est)
}

// ---------------------------------------------------------------------------
// Max-overlap concentration bounds (variant "lemma_bounds")
// ---------------------------------------------------------------------------

/// Off-diagonal and diagonal extremes of one block's overlaps, from the
/// factor rows: `max_{a != b} |P[a][b]|^2` and `max_a (P[a][a] - d/D)^2`.
fn overlap_extremes(factor: &Array2<Complex64>, total_dim: usize) -> (f64, f64) {
    let d = factor.nrows();
    let target = d as f64 / total_dim as f64;
    // contiguous columns: copy into a (D x d) row-major layout once
    let cols = factor.t().as_standard_layout().to_owned();
    let mut max_off = 0.0_f64;
    let mut max_diag = 0.0_f64;
    for a in 0..total_dim {
        let col_a = cols.row(a);
        let diag: f64 = col_a.iter().map(|z| z.norm_sqr()).sum();
        let dev = diag - target;
        max_diag = max_diag.max(dev * dev);
        for b in a + 1..total_dim {
            let col_b = cols.row(b);
            let mut p = Complex64::new(0.0, 0.0);
            for (x, y) in col_a.iter().zip(col_b.iter()) {
                p += x * y.conj();
            }
            max_off = max_off.max(p.norm_sqr());
        }
    }
    (max_off, max_diag)
}

/// Samples random orthonormal frames and verifies the expected-maximum and
/// tail bounds of the two overlap max-statistics for a single block of
/// dimension `dims[0]`.
pub fn run_max_overlap_bounds_experiment(config: &ExperimentConfig) -> Result<TypicalityEstimate> {
    config.validate()?;
    let d = config.dims[0];
    let dim = config.dimension;
    if d >= dim {
        return Err(Error::InvalidArgument(format!(
            "dims: examined block must satisfy d < D, got d = {d}, D = {dim}"
        )));
    }
    if config.trials < 30 {
        return Err(Error::InvalidArgument(
            "trials: need at least 30 for the bound experiment".into(),
        ));
    }
    let params = config.params.to_params(config.dims.len())?;
    let bounds = normality_bounds(&params, d, dim);
    let a = config.constants.a.unwrap_or(bounds.bound2 / 2.0);
    if !(a > 0.0) {
        return Err(Error::InvalidArgument("constants.a must be positive".into()));
    }

    let rows: Vec<(Vec<f64>, bool)> = (0..config.trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = config.seed.stream(k as u64).rng();
            let factor = stiefel_rows_with_rng(d, dim, &mut rng).expect("valid frame dims");
            let (off, diag) = overlap_extremes(&factor, dim);
            (vec![off, diag], true)
        })
        .collect();

    let n = config.trials as f64;
    let log_d = (dim as f64).ln();
    let mean_bound_off = log_d / dim as f64;
    let mean_bound_diag = 9.0 * d as f64 * log_d / (dim as f64 * dim as f64);

    let mean_off = rows.iter().map(|(v, _)| v[0]).sum::<f64>() / n;
    let mean_diag = rows.iter().map(|(v, _)| v[1]).sum::<f64>() / n;
    let tail_off = rows.iter().filter(|(v, _)| v[0] >= a).count() as f64 / n;
    let tail_diag = rows.iter().filter(|(v, _)| v[1] >= a).count() as f64 / n;

    let df = dim as f64;
    let theta = 1.0 - 2.0 / (3.0 * config.constants.c2.sqrt());
    let tail_bound_off = df * df / 2.0 * (-4.0 * a * (df - 1.0)).exp();
    let tail_bound_diag = df.powi(3) / ((std::f64::consts::TAU * d as f64).sqrt() * (df - d as f64))
        * (-theta * df * df * a / (2.0 * d as f64)).exp();

    // per-trial success: both extremes below the expected-maximum bounds
    let rows: Vec<(Vec<f64>, bool)> = rows
        .into_iter()
        .map(|(v, _)| {
            let ok = v[0] <= mean_bound_off && v[1] <= mean_bound_diag;
            (v, ok)
        })
        .collect();
    let successes = rows.iter().filter(|(_, s)| *s).count();

    let c1 = config.constants.c1;
    let c2 = config.constants.c2;
    let mut est = estimate_skeleton(config, successes)?;
    est.details.insert("block_dim".into(), d as f64);
    est.details.insert("mean_offdiag_max".into(), mean_off);
    est.details
        .insert("mean_offdiag_bound".into(), mean_bound_off);
    est.details.insert("mean_diag_max".into(), mean_diag);
    est.details
        .insert("mean_diag_bound".into(), mean_bound_diag);
    est.details.insert("tail_threshold".into(), a);
    est.details.insert("tail_offdiag_empirical".into(), tail_off);
    est.details
        .insert("tail_offdiag_bound".into(), tail_bound_off);
    est.details.insert("tail_diag_empirical".into(), tail_diag);
    est.details.insert("tail_diag_bound".into(), tail_bound_diag);
    est.details.insert("theta".into(), theta);
    est.hypothesis_check.insert(
        "c1_window".into(),
        c1 * log_d < d as f64 && (d as f64) < df / c1,
    );
    est.hypothesis_check.insert(
        "c2_window".into(),
        c2 < d as f64 && (d as f64) < df - c2,
    );
    est.hypothesis_check.insert(
        "tail_threshold_in_range".into(),
        a < (d * d) as f64 / (df * df * c2),
    );
    est.hypothesis_check
        .insert("mean_offdiag_below_bound".into(), mean_off <= mean_bound_off);
    est.hypothesis_check
        .insert("mean_diag_below_bound".into(), mean_diag <= mean_bound_diag);
    est.hypothesis_check
        .insert("tail_offdiag_below_bound".into(), tail_off <= tail_bound_off);
    est.hypothesis_check
        .insert("tail_diag_below_bound".into(), tail_diag <= tail_bound_diag);
    est.trial_value_labels = vec!["offdiag_max".into(), "diag_max".into()];
    est.per_trial_records = records_from(config, rows);
    Ok(est)
}

// ---------------------------------------------------------------------------
// Condition typicality (variants "theorem1", "theorem2", "theorem3")
// ---------------------------------------------------------------------------

/// Per-block condition values of one sampled alignment.
fn block_condition_values(alignment: &Array2<Complex64>, dims: &[usize]) -> Vec<f64> {
    let total = alignment.nrows();
    let mut values = Vec::with_capacity(dims.len());
    let mut offset = 0;
    for &d in dims {
        let factor = alignment.slice(ndarray::s![offset..offset + d, ..]);
        values.push(crate::normality::condition_value_factored(&factor, total));
        offset += d;
    }
    values
}

/// Samples decompositions (or Hamiltonian eigenbases, for the
/// random-Hamiltonian variant) and counts trials whose condition value stays
/// below the variant's bound for every block.
pub fn run_condition_typicality_experiment(
    config: &ExperimentConfig,
) -> Result<TypicalityEstimate> {
    config.validate()?;
    let (use_bound1, conjugate_alignment) = match config.variant {
        Variant::RandomDecomposition => (true, false),
        Variant::RandomDecompositionStrong => (false, false),
        Variant::RandomHamiltonian => (false, true),
        other => {
            return Err(Error::InvalidArgument(format!(
                "variant {other:?} is not a condition-typicality experiment"
            )))
        }
    };
    let dim = config.dimension;
    let n_blocks = config.dims.len();
    let params = config.params.to_params(n_blocks)?;

    let thresholds: Vec<f64> = config
        .dims
        .iter()
        .map(|&d| match config.threshold_override {
            Some(t) => t,
            None => {
                let b = normality_bounds(&params, d, dim);
                if use_bound1 {
                    b.bound1
                } else {
                    b.bound2
                }
            }
        })
        .collect();

    let rows: Vec<(Vec<f64>, bool)> = (0..config.trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = config.seed.stream(k as u64).rng();
            let mut alignment = haar_unitary_with_rng(dim, &mut rng)
                .expect("dim >= 2")
                .entries()
                .clone();
            if conjugate_alignment {
                // eigenbasis U of a conjugated Hamiltonian: the overlaps in
                // the energy eigenbasis equal those of a decomposition whose
                // alignment is conj(U)
                alignment.mapv_inplace(|z| z.conj());
            }
            let values = block_condition_values(&alignment, &config.dims);
            let success = values
                .iter()
                .zip(thresholds.iter())
                .all(|(v, t)| v < t);
            (values, success)
        })
        .collect();

    let successes = rows.iter().filter(|(_, s)| *s).count();
    let n = config.trials as f64;

    // per-trial maximum over blocks, for the Markov-step sanity numbers
    let max_values: Vec<f64> = rows
        .iter()
        .map(|(v, _)| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mean_max = max_values.iter().sum::<f64>() / n;
    let mut sorted = max_values.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    let median_max = sorted[sorted.len() / 2];
    let min_threshold = thresholds.iter().cloned().fold(f64::INFINITY, f64::min);
    let exceed_fraction =
        max_values.iter().filter(|&&v| v >= min_threshold).count() as f64 / n;
    let markov_rhs = mean_max / min_threshold + 3.0 / n.sqrt();

    let log_d = (dim as f64).ln();
    let df = dim as f64;
    let c1 = config.constants.c1;
    let c2 = config.constants.c2;
    let e2dp = params.epsilon * params.epsilon * params.delta_prime;

    let mut est = estimate_skeleton(config, successes)?;
    est.details.insert("mean_max_condition".into(), mean_max);
    est.details
        .insert("median_max_condition".into(), median_max);
    est.details.insert("min_threshold".into(), min_threshold);
    est.details
        .insert("threshold_exceed_fraction".into(), exceed_fraction);
    est.hypothesis_check
        .insert("markov_consistent".into(), exceed_fraction <= markov_rhs);
    if use_bound1 {
        let lower = (c1.max(10.0 * (n_blocks * n_blocks) as f64 / (e2dp * config.delta))) * log_d;
        est.hypothesis_check.insert(
            "dims_above_lower_threshold".into(),
            config.dims.iter().all(|&d| (d as f64) > lower),
        );
        est.hypothesis_check.insert(
            "dims_below_upper_threshold".into(),
            config.dims.iter().all(|&d| (d as f64) < df / c1),
        );
    } else {
        let lower = c2.max((3.0 * n_blocks as f64 / e2dp * df * log_d).sqrt());
        est.hypothesis_check.insert(
            "dims_above_lower_threshold".into(),
            config.dims.iter().all(|&d| (d as f64) > lower),
        );
        est.hypothesis_check.insert(
            "dims_below_upper_threshold".into(),
            config.dims.iter().all(|&d| (d as f64) < df - c2),
        );
        est.hypothesis_check
            .insert("eps_sq_delta_prime_small".into(), e2dp < 2.0 * n_blocks as f64 / c2);
        est.hypothesis_check.insert(
            "dim_log_ratio_large".into(),
            df / log_d > 100.0 * n_blocks as f64 / e2dp,
        );
        est.hypothesis_check
            .insert("dim_exceeds_inverse_delta".into(), df > 1.0 / config.delta);
    }
    est.trial_value_labels = (1..=n_blocks).map(|nu| format!("cond_{nu}")).collect();
    est.per_trial_records = records_from(config, rows);
    Ok(est)
}

/// Condition values of the first block over `trials` independent frames:
/// the raw material of scaling studies. Trial `k` uses stream `k`.
pub fn sample_condition_values(
    d: usize,
    dim: usize,
    trials: usize,
    seed: SeedSpec,
) -> Result<Vec<f64>> {
    if d == 0 || d > dim {
        return Err(Error::InvalidArgument(format!(
            "block dimension {d} must lie in 1..={dim}"
        )));
    }
    Ok((0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed.stream(k as u64).rng();
            let factor = stiefel_rows_with_rng(d, dim, &mut rng).expect("valid dims");
            crate::normality::condition_value_factored(&factor.view(), dim)
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Equilibrium experiment (variant "equilibrium")
// ---------------------------------------------------------------------------

/// Samples decompositions with a dominant equilibrium block and checks that
/// every probe state (uniform states, all energy eigenstates, and the
/// worst-case-search state) spends at least a `1 - delta'` fraction of time
/// with `||P_eq psi_t||^2 > 1 - 2 eps`. The eigenstate-thermalization
/// diagnostic `max_a |P_eq[a][a] - d_eq/D|` is recorded per trial.
pub fn run_equilibrium_experiment(config: &ExperimentConfig) -> Result<TypicalityEstimate> {
    config.validate()?;
    let dim = config.dimension;
    let d_eq = config.dims[0];
    if config.dims.len() > 2 {
        return Err(Error::InvalidArgument(
            "dims: equilibrium experiment takes [d_eq] or [d_eq, D - d_eq]".into(),
        ));
    }
    let eps = config.params.epsilon;
    let delta_prime = config.params.delta_prime;
    let q_eq = d_eq as f64 / dim as f64;
    if q_eq < 1.0 - eps {
        return Err(Error::InvalidArgument(format!(
            "dims: d_eq/D = {q_eq:.6} violates the equilibrium precondition >= 1 - eps = {:.6}",
            1.0 - eps
        )));
    }
    let threshold = 1.0 - 2.0 * eps;
    let spectrum = config.resolve_spectrum()?;
    if spectrum.dim() != dim {
        return Err(Error::DimensionMismatch(
            "spectrum dimension differs from config dimension".into(),
        ));
    }
    let t_max = occupation_horizon(&spectrum, config.cycles)?;
    let d_rest = dim - d_eq;

    struct TrialOutcome {
        diag_dev_max: f64,
        eigenstate_pass: usize,
        uniform_pass: usize,
        worst_pass: bool,
        success: bool,
    }

    let outcomes: Vec<TrialOutcome> = (0..config.trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = config.seed.stream(k as u64).rng();
            if d_rest == 0 {
                // single-block decomposition: occupation is identically 1
                return TrialOutcome {
                    diag_dev_max: 0.0,
                    eigenstate_pass: dim,
                    uniform_pass: config.probe_uniform_states,
                    worst_pass: true,
                    success: true,
                };
            }
            let alignment = haar_unitary_with_rng(dim, &mut rng).expect("dim >= 2");
            let rest_factor = alignment
                .entries()
                .slice(ndarray::s![d_eq.., ..])
                .to_owned();
            let rest = projector_from_factor(1, rest_factor);

            // equilibrium diagonal via the complement
            let rest_diag = rest.diagonal();
            let mut eigenstate_pass = 0usize;
            let mut diag_dev_max = 0.0_f64;
            for r in &rest_diag {
                let p_eq = 1.0 - r;
                if p_eq > threshold {
                    eigenstate_pass += 1;
                }
                diag_dev_max = diag_dev_max.max((p_eq - q_eq).abs());
            }

            let mut probes: Vec<StateVector> = (0..config.probe_uniform_states)
                .map(|_| uniform_state_with_rng(dim, &mut rng).expect("dim >= 2"))
                .collect();
            let jitter = uniform_closed_open(&mut rng);
            let worst = worst_case_g(&rest, config.optimizer_starts);
            probes.push(
                StateVector::from_populations(&worst.argmax_population)
                    .expect("simplex populations"),
            );

            let dt = t_max / config.n_samples as f64;
            let mut passes = Vec::with_capacity(probes.len());
            for state in &probes {
                let mut inside = 0usize;
                for s in 0..config.n_samples {
                    let t = (s as f64 + jitter) * dt;
                    let weighted = crate::hilbert::phase_weighted(state, &spectrum, t);
                    let occ_eq = 1.0 - rest.occupation_from_weighted(&weighted);
                    if occ_eq > threshold {
                        inside += 1;
                    }
                }
                passes.push(inside as f64 / config.n_samples as f64 >= 1.0 - delta_prime);
            }
            let worst_pass = *passes.last().expect("at least the worst-case probe");
            let uniform_pass = passes[..config.probe_uniform_states]
                .iter()
                .filter(|&&p| p)
                .count();
            let success = eigenstate_pass == dim
                && uniform_pass == config.probe_uniform_states
                && worst_pass;
            TrialOutcome {
                diag_dev_max,
                eigenstate_pass,
                uniform_pass,
                worst_pass,
                success,
            }
        })
        .collect();

    let successes = outcomes.iter().filter(|o| o.success).count();
    let n = config.trials as f64;
    let mut est = estimate_skeleton(config, successes)?;
    est.details.insert(
        "eigenstate_diag_deviation_mean".into(),
        outcomes.iter().map(|o| o.diag_dev_max).sum::<f64>() / n,
    );
    est.details.insert(
        "eigenstate_diag_deviation_worst".into(),
        outcomes
            .iter()
            .map(|o| o.diag_dev_max)
            .fold(0.0, f64::max),
    );
    est.details.insert(
        "eigenstate_pass_fraction".into(),
        outcomes.iter().map(|o| o.eigenstate_pass).sum::<usize>() as f64 / (n * dim as f64),
    );
    est.details.insert(
        "uniform_probe_pass_fraction".into(),
        outcomes.iter().map(|o| o.uniform_pass).sum::<usize>() as f64
            / (n * config.probe_uniform_states.max(1) as f64),
    );
    est.details.insert(
        "worst_case_probe_pass_fraction".into(),
        outcomes.iter().filter(|o| o.worst_pass).count() as f64 / n,
    );
    est.details.insert("occupation_threshold".into(), threshold);
    est.details.insert("time_horizon".into(), t_max);

    let df = dim as f64;
    let log_d = df.ln();
    let c2 = config.constants.c2;
    let e2dp = eps * eps * delta_prime;
    let window = c2.max((6.0 / e2dp * df * log_d).sqrt());
    est.hypothesis_check.insert(
        "equilibrium_dim_window".into(),
        (d_eq as f64) > window && (d_eq as f64) < df - window,
    );
    est.hypothesis_check
        .insert("eps_sq_delta_prime_small".into(), e2dp < 4.0 / c2);
    est.hypothesis_check.insert(
        "dim_log_ratio_large".into(),
        df / log_d > 200.0 / e2dp,
    );
    est.hypothesis_check
        .insert("dim_exceeds_inverse_delta".into(), df > 1.0 / config.delta);
    est.trial_value_labels = vec!["eigenstate_diag_deviation_max".into()];
    est.per_trial_records = records_from(
        config,
        outcomes
            .iter()
            .map(|o| (vec![o.diag_dev_max], o.success))
            .collect(),
    );
    Ok(est)
}

// ---------------------------------------------------------------------------
// Quantifier contrast (variant "quantifier_contrast")
// ---------------------------------------------------------------------------

/// The fixed-state versus all-states contrast report.
#[derive(Debug, Clone, Serialize)]
pub struct QuantifierContrastReport {
    pub dimension: usize,
    pub block_dim: usize,
    pub mc_pairs: usize,
    pub trials: usize,
    /// `E_D[G(psi_0 fixed)]` over random decompositions.
    pub fixed_state_mean_g: f64,
    /// The same, relative to `(d/D)^2`; small means the averaged statement
    /// holds.
    pub mean_g_rel: f64,
    /// `1/d`: the relative bound implied when every block dimension exceeds
    /// `1/eta`.
    pub mean_g_rel_bound: f64,
    /// `E[(time-averaged occupation - d/D)^2]` over random pairs.
    pub time_avg_mean_sq_dev: f64,
    /// The same, relative to `(d/D)^2`.
    pub time_avg_rel: f64,
    /// `2 (D - d) / (d D)`, the bound it must stay below.
    pub time_avg_rel_bound: f64,
    /// Threshold separating "good" decompositions (a `bound2`-style value).
    pub threshold: f64,
    /// Fraction of sampled decompositions good for the one fixed state.
    pub fixed_good_fraction: f64,
    pub fixed_good_interval: (f64, f64),
    /// Fraction good for all states (worst case below the threshold).
    pub forall_good_fraction: f64,
    pub forall_good_interval: (f64, f64),
    /// Min, quartiles, and max of the worst-case statistic over
    /// decompositions.
    pub worst_case_quantiles: [f64; 5],
    /// The adversarial aligned decomposition: fixed-state deviation stays
    /// small while the worst case is macroscopic.
    pub aligned_fixed_g: f64,
    pub aligned_worst_case_g: f64,
    pub aligned_condition_value: f64,
    pub aligned_fixed_passes: bool,
    pub aligned_forall_fails: bool,
}

/// Runs the quantifier-order contrast on the first block: (a) expectation
/// estimates over random (decomposition, state) pairs, (b) the distribution
/// of the worst-case statistic over decompositions, (c) the fraction of
/// decompositions good for a fixed state versus good for all states, and
/// (d) the aligned adversarial decomposition on which the fixed-state
/// statement survives while the all-states statement fails.
pub fn run_quantifier_contrast(config: &ExperimentConfig) -> Result<QuantifierContrastReport> {
    config.validate()?;
    if config.trials < 30 {
        return Err(Error::InvalidArgument(
            "trials: need at least 30 for the contrast".into(),
        ));
    }
    let dim = config.dimension;
    let d = config.dims[0];
    if d >= dim {
        return Err(Error::InvalidArgument(
            "dims: contrast block must satisfy d < D".into(),
        ));
    }
    let q = d as f64 / dim as f64;
    let params = config.params.to_params(config.dims.len())?;
    let threshold = match config.threshold_override {
        Some(t) => t,
        None => normality_bounds(&params, d, dim).bound2,
    };

    let fixed_state = crate::sampling::uniform_state(dim, config.seed.global(1))?;
    let fixed_populations = fixed_state.populations();

    // (a) expectation estimates over independent (decomposition, state) pairs
    let pair_stats: Vec<(f64, f64)> = (0..config.mc_pairs)
        .into_par_iter()
        .map(|k| {
            let mut rng = config.seed.stream(k as u64).rng();
            let factor = stiefel_rows_with_rng(d, dim, &mut rng).expect("valid dims");
            let state = uniform_state_with_rng(dim, &mut rng).expect("dim >= 2");
            let populations = state.populations();
            let g = deviation_g_factored(&factor.view(), &populations, dim);
            let mut diag_dot = 0.0;
            for (row_idx, row) in factor.outer_iter().enumerate() {
                let _ = row_idx;
                for (z, p) in row.iter().zip(populations.iter()) {
                    diag_dot += z.norm_sqr() * p;
                }
            }
            let tavg_dev = diag_dot - q;
            (g, tavg_dev * tavg_dev)
        })
        .collect();
    let n_pairs = config.mc_pairs as f64;
    let mean_g = pair_stats.iter().map(|(g, _)| g).sum::<f64>() / n_pairs;
    let mean_tavg_sq = pair_stats.iter().map(|(_, t)| t).sum::<f64>() / n_pairs;

    // (b) + (c): per-decomposition fixed-state G and worst-case statistic
    let per_decomp: Vec<(f64, f64)> = (0..config.trials)
        .into_par_iter()
        .map(|j| {
            let stream = config.mc_pairs as u64 + j as u64;
            let mut rng = config.seed.stream(stream).rng();
            let factor = stiefel_rows_with_rng(d, dim, &mut rng).expect("valid dims");
            let g_fixed = deviation_g_factored(&factor.view(), &fixed_populations, dim);
            let proj = projector_from_factor(0, factor);
            let worst = worst_case_g(&proj, config.optimizer_starts);
            (g_fixed, worst.g_max)
        })
        .collect();

    let fixed_good = per_decomp.iter().filter(|(g, _)| *g < threshold).count();
    let forall_good = per_decomp.iter().filter(|(_, w)| *w < threshold).count();
    let mut worst_sorted: Vec<f64> = per_decomp.iter().map(|(_, w)| *w).collect();
    worst_sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let quantile = |f: f64| -> f64 {
        let idx = ((worst_sorted.len() - 1) as f64 * f).round() as usize;
        worst_sorted[idx]
    };
    let worst_case_quantiles = [
        worst_sorted[0],
        quantile(0.25),
        quantile(0.5),
        quantile(0.75),
        worst_sorted[worst_sorted.len() - 1],
    ];

    // (d) aligned adversarial decomposition
    let aligned = MacroDecomposition::aligned(vec![d, dim - d])?;
    let aligned_proj = crate::hilbert::build_projector_overlaps(&aligned, 0)?;
    let aligned_factor = aligned
        .alignment()
        .entries()
        .slice(ndarray::s![..d, ..]);
    let aligned_fixed_g = deviation_g_factored(&aligned_factor, &fixed_populations, dim);
    let aligned_worst = worst_case_g(&aligned_proj, config.optimizer_starts);
    let aligned_condition = condition_value(&aligned_proj);

    Ok(QuantifierContrastReport {
        dimension: dim,
        block_dim: d,
        mc_pairs: config.mc_pairs,
        trials: config.trials,
        fixed_state_mean_g: mean_g,
        mean_g_rel: mean_g / (q * q),
        mean_g_rel_bound: 1.0 / d as f64,
        time_avg_mean_sq_dev: mean_tavg_sq,
        time_avg_rel: mean_tavg_sq / (q * q),
        time_avg_rel_bound: 2.0 * (dim - d) as f64 / (d as f64 * dim as f64),
        threshold,
        fixed_good_fraction: fixed_good as f64 / config.trials as f64,
        fixed_good_interval: wilson_interval(fixed_good, config.trials, 0.95)?,
        forall_good_fraction: forall_good as f64 / config.trials as f64,
        forall_good_interval: wilson_interval(forall_good, config.trials, 0.95)?,
        worst_case_quantiles,
        aligned_fixed_g,
        aligned_worst_case_g: aligned_worst.g_max,
        aligned_condition_value: aligned_condition,
        aligned_fixed_passes: aligned_fixed_g < threshold,
        aligned_forall_fails: aligned_worst.g_max >= q * q,
    })
}

// ---------------------------------------------------------------------------
// Dispatcher
// ---------------------------------------------------------------------------

/// Output of [`run_experiment`]; all variants but the contrast produce a
/// [`TypicalityEstimate`].
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum ExperimentOutput {
    Estimate(TypicalityEstimate),
    Contrast(Box<QuantifierContrastReport>),
}

/// Runs the experiment named by `config.variant`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    match config.variant {
        Variant::UniformOverlap => {
            run_uniform_overlap_experiment(config).map(ExperimentOutput::Estimate)
        }
        Variant::MaxOverlapBounds => {
            run_max_overlap_bounds_experiment(config).map(ExperimentOutput::Estimate)
        }
        Variant::RandomDecomposition
        | Variant::RandomDecompositionStrong
        | Variant::RandomHamiltonian => {
            run_condition_typicality_experiment(config).map(ExperimentOutput::Estimate)
        }
        Variant::Equilibrium => run_equilibrium_experiment(config).map(ExperimentOutput::Estimate),
        Variant::QuantifierContrast => {
            run_quantifier_contrast(config).map(|r| ExperimentOutput::Contrast(Box::new(r)))
        }
    }
}

//! The deviation functional `G`, its state-independent upper bound, the two
//! normality bounds, empirical time-fraction estimation, macro-observable
//! deviations, and the worst-case-initial-state search.
//!
//! For a non-degenerate, resonance-free spectrum the infinite-time average of
//! `| ||P_nu psi_t||^2 - d/D |^2` has the closed form
//!
//! ```text
//! G = sum_{a != b} p_a p_b |P[a][b]|^2 + (sum_a p_a P[a][a] - d/D)^2 ,
//! ```
//!
//! a function of the populations `p_a = |c_a|^2` alone. Everything in this
//! module is built on that expression: `deviation_g` evaluates it,
//! `condition_value` bounds it uniformly over states, `worst_case_g`
//! maximizes it over the population simplex, and `deviation_g_empirical`
//! estimates the same quantity by sampling times, serving as the independent
//! check that the closed form is wired correctly.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    macro_occupation_at_time, phase_weighted, EnergySpectrum, MacroDecomposition,
    ProjectorOverlaps, StateVector,
};
use crate::sampling::{uniform_closed_open, SeedSpec};

/// Which per-time inequality (and hence which bound) is in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalitySense {
    /// Band half-width `eps * sqrt(d_nu / (N D))`.
    VonNeumann,
    /// Band half-width `eps * d_nu / D` (relative error small).
    Strong,
}

/// Tolerances of a normality statement.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormalityParams {
    pub epsilon: f64,
    pub delta_prime: f64,
    /// Number of macro-spaces `N`.
    pub blocks: usize,
    pub sense: NormalitySense,
}

impl NormalityParams {
    pub fn new(epsilon: f64, delta_prime: f64, blocks: usize, sense: NormalitySense) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if !(delta_prime > 0.0 && delta_prime < 1.0) {
            return Err(Error::InvalidArgument(
                "delta_prime must lie in (0, 1)".into(),
            ));
        }
        if blocks == 0 {
            return Err(Error::InvalidArgument("blocks must be positive".into()));
        }
        Ok(Self {
            epsilon,
            delta_prime,
            blocks,
            sense,
        })
    }

    /// Half-width of the allowed occupation band around `d/D` for a block of
    /// dimension `d`, in the configured sense.
    pub fn band_half_width(&self, d: usize, dim: usize) -> f64 {
        let q = d as f64 / dim as f64;
        match self.sense {
            NormalitySense::VonNeumann => {
                self.epsilon * (d as f64 / (self.blocks as f64 * dim as f64)).sqrt()
            }
            NormalitySense::Strong => self.epsilon * q,
        }
    }
}

/// The two sufficiency thresholds on `G`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormalityBounds {
    /// `eps^2 * (d / (N D)) * (delta' / N)`; `G < bound1` gives normality in
    /// von Neumann's sense.
    pub bound1: f64,
    /// `eps^2 * (d/D)^2 * (delta' / N)`; `G < bound2` gives normality in the
    /// strong sense.
    pub bound2: f64,
}

/// Evaluates both bounds for a block of dimension `d` out of `dim`.
pub fn normality_bounds(params: &NormalityParams, d: usize, dim: usize) -> NormalityBounds {
    let n = params.blocks as f64;
    let q = d as f64 / dim as f64;
    let eps_sq = params.epsilon * params.epsilon;
    let tail = params.delta_prime / n;
    NormalityBounds {
        bound1: eps_sq * (d as f64 / (n * dim as f64)) * tail,
        bound2: eps_sq * q * q * tail,
    }
}

fn require_spectrum_hypotheses(spectrum: &EnergySpectrum) -> Result<()> {
    let report = spectrum.report();
    if !report.is_nondegenerate {
        return Err(Error::DegenerateSpectrum);
    }
    if !report.is_nonresonant {
        return Err(Error::ResonantSpectrum);
    }
    Ok(())
}

/// Exact infinite-time average of the squared occupation deviation for one
/// block, via the closed form. Refuses degenerate or resonant spectra, for
/// which the closed form does not hold; use [`deviation_g_empirical`] there.
pub fn deviation_g(
    state: &StateVector,
    spectrum: &EnergySpectrum,
    proj: &ProjectorOverlaps,
) -> Result<f64> {
    if state.dim() != proj.total_dim() || spectrum.dim() != state.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state {}, spectrum {}, projector {}",
            state.dim(),
            spectrum.dim(),
            proj.total_dim()
        )));
    }
    require_spectrum_hypotheses(spectrum)?;
    Ok(DeviationFunctional::from_overlaps(proj).eval(&state.populations()))
}

/// `G` computed from the `d x D` factor rows alone in `O(d^2 D)`:
/// `sum_{a,b} p_a p_b |P[a][b]|^2 = ||A sqrt(diag p) (A sqrt(diag p))^dag||_F^2`.
/// Used by the Monte Carlo loops that never materialize the full matrix.
pub(crate) fn deviation_g_factored(
    factor: &ndarray::ArrayView2<num_complex::Complex64>,
    populations: &[f64],
    total_dim: usize,
) -> f64 {
    let d = factor.nrows();
    debug_assert_eq!(factor.ncols(), populations.len());
    let target = d as f64 / total_dim as f64;

    // diag P_aa = sum_g |A[g][a]|^2
    let mut diag = vec![0.0_f64; populations.len()];
    for row in factor.outer_iter() {
        for (acc, z) in diag.iter_mut().zip(row.iter()) {
            *acc += z.norm_sqr();
        }
    }

    // M = B B^dag with B = A diag(sqrt p); ||M||_F^2 = sum p_a p_b |P_ab|^2
    let sqrt_p: Vec<f64> = populations.iter().map(|p| p.max(0.0).sqrt()).collect();
    let mut frob_sq = 0.0;
    for g in 0..d {
        let row_g = factor.row(g);
        for h in g..d {
            let row_h = factor.row(h);
            let mut m = num_complex::Complex64::new(0.0, 0.0);
            for ((a, b), sp) in row_g.iter().zip(row_h.iter()).zip(sqrt_p.iter()) {
                m += a * b.conj() * (sp * sp);
            }
            frob_sq += if g == h { m.norm_sqr() } else { 2.0 * m.norm_sqr() };
        }
    }

    let mut diag_sq_weighted = 0.0;
    let mut mean_dev = -target;
    for (p, q) in populations.iter().zip(diag.iter()) {
        diag_sq_weighted += p * p * q * q;
        mean_dev += p * q;
    }
    (frob_sq - diag_sq_weighted) + mean_dev * mean_dev
}

/// Time-sampled estimate of the squared occupation deviation: the mean of
/// `|occupation(t) - d/D|^2` over `n_samples` times on a jittered uniform
/// grid in `[0, t_max]` (one random grid offset per call, drawn from `seed`).
/// Valid for any spectrum; serves as the independent oracle for
/// [`deviation_g`].
pub fn deviation_g_empirical(
    state: &StateVector,
    spectrum: &EnergySpectrum,
    proj: &ProjectorOverlaps,
    t_max: f64,
    n_samples: usize,
    seed: SeedSpec,
) -> Result<f64> {
    if !(t_max > 0.0) {
        return Err(Error::InvalidArgument("t_max must be positive".into()));
    }
    if n_samples < 2 {
        return Err(Error::InvalidArgument(
            "n_samples must be at least 2".into(),
        ));
    }
    let target = proj.dim() as f64 / proj.total_dim() as f64;
    let mut rng = seed.rng();
    let offset = uniform_closed_open(&mut rng);
    let dt = t_max / n_samples as f64;
    let mut acc = 0.0;
    for k in 0..n_samples {
        let t = (k as f64 + offset) * dt;
        let occ = macro_occupation_at_time(state, spectrum, proj, t)?;
        let dev = occ - target;
        acc += dev * dev;
    }
    Ok(acc / n_samples as f64)
}

/// State-independent upper bound on `G` for one block:
/// `max_{a != b} |P[a][b]|^2 + max_a (P[a][a] - d/D)^2`.
pub fn condition_value(proj: &ProjectorOverlaps) -> f64 {
    let dim = proj.total_dim();
    let target = proj.dim() as f64 / dim as f64;
    let m = proj.matrix();
    let mut max_off = 0.0_f64;
    let mut max_diag = 0.0_f64;
    for a in 0..dim {
        let dev = m[[a, a]].re - target;
        max_diag = max_diag.max(dev * dev);
        for b in a + 1..dim {
            max_off = max_off.max(m[[a, b]].norm_sqr());
        }
    }
    max_off + max_diag
}

/// Same quantity computed from the factor rows without the full matrix.
pub(crate) fn condition_value_factored(
    factor: &ndarray::ArrayView2<num_complex::Complex64>,
    total_dim: usize,
) -> f64 {
    let d = factor.nrows();
    let target = d as f64 / total_dim as f64;
    let mut max_off = 0.0_f64;
    let mut max_diag = 0.0_f64;
    for a in 0..total_dim {
        let col_a = factor.column(a);
        let diag: f64 = col_a.iter().map(|z| z.norm_sqr()).sum();
        let dev = diag - target;
        max_diag = max_diag.max(dev * dev);
        for b in a + 1..total_dim {
            let col_b = factor.column(b);
            let mut p = num_complex::Complex64::new(0.0, 0.0);
            for (x, y) in col_a.iter().zip(col_b.iter()) {
                p += x * y.conj();
            }
            max_off = max_off.max(p.norm_sqr());
        }
    }
    max_off + max_diag
}

/// Fractions of sampled times at which the occupation band holds.
#[derive(Debug, Clone, Serialize)]
pub struct TimeFractions {
    /// Fraction of times at which the inequality holds for all blocks
    /// simultaneously.
    pub all_blocks: f64,
    /// Per-block fractions.
    pub per_block: Vec<f64>,
}

/// Estimates, on a jittered uniform grid of `n_samples` times in
/// `[0, t_max]`, the fraction of times at which the sense-appropriate
/// inequality `| ||P_nu psi_t||^2 - d_nu/D | < band_nu` holds for every
/// block simultaneously, plus the per-block fractions.
pub fn time_fraction_normal(
    state: &StateVector,
    spectrum: &EnergySpectrum,
    projs: &[ProjectorOverlaps],
    params: &NormalityParams,
    t_max: f64,
    n_samples: usize,
    seed: SeedSpec,
) -> Result<TimeFractions> {
    if n_samples < 16 {
        return Err(Error::InvalidArgument(
            "n_samples must be at least 16".into(),
        ));
    }
    if !(t_max > 0.0) {
        return Err(Error::InvalidArgument("t_max must be positive".into()));
    }
    if projs.is_empty() {
        return Err(Error::InvalidArgument("no projector overlaps given".into()));
    }
    let dim = state.dim();
    for p in projs {
        if p.total_dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "projector dimension {} vs state dimension {}",
                p.total_dim(),
                dim
            )));
        }
    }
    let bands: Vec<(f64, f64)> = projs
        .iter()
        .map(|p| {
            (
                p.dim() as f64 / dim as f64,
                params.band_half_width(p.dim(), dim),
            )
        })
        .collect();

    let mut rng = seed.rng();
    let offset = uniform_closed_open(&mut rng);
    let dt = t_max / n_samples as f64;
    let mut all_count = 0usize;
    let mut per_block = vec![0usize; projs.len()];
    for k in 0..n_samples {
        let t = (k as f64 + offset) * dt;
        let weighted = phase_weighted(state, spectrum, t);
        let mut all_ok = true;
        for (i, p) in projs.iter().enumerate() {
            let occ = p.occupation_from_weighted(&weighted);
            let (target, band) = bands[i];
            if (occ - target).abs() < band {
                per_block[i] += 1;
            } else {
                all_ok = false;
            }
        }
        if all_ok {
            all_count += 1;
        }
    }
    let n = n_samples as f64;
    Ok(TimeFractions {
        all_blocks: all_count as f64 / n,
        per_block: per_block.into_iter().map(|c| c as f64 / n).collect(),
    })
}

/// Both sides of the macro-observable inequality for
/// `A = sum_nu alpha_nu P_nu` at one instant.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MacroObservableDeviation {
    /// `| <psi_t| A |psi_t> - tr A / D |`.
    pub lhs: f64,
    /// `sqrt(tr(A^2) / D)`, the micro-canonical magnitude of `A`.
    pub rhs_scale: f64,
}

/// Evaluates the deviation of the macro-observable expectation from its
/// micro-canonical average, and the observable's magnitude scale:
/// `<psi_t|A|psi_t> = sum_nu alpha_nu ||P_nu psi_t||^2`,
/// `tr A / D = sum_nu alpha_nu d_nu / D`,
/// `tr(A^2) / D = sum_nu alpha_nu^2 d_nu / D`.
pub fn macro_observable_deviation(
    state: &StateVector,
    spectrum: &EnergySpectrum,
    projs: &[ProjectorOverlaps],
    weights: &[f64],
    t: f64,
) -> Result<MacroObservableDeviation> {
    if weights.len() != projs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} blocks",
            weights.len(),
            projs.len()
        )));
    }
    let dim = state.dim() as f64;
    let weighted = phase_weighted(state, spectrum, t);
    let mut expectation = 0.0;
    let mut trace_avg = 0.0;
    let mut trace_sq_avg = 0.0;
    for (p, &w) in projs.iter().zip(weights.iter()) {
        expectation += w * p.occupation_from_weighted(&weighted);
        trace_avg += w * p.dim() as f64 / dim;
        trace_sq_avg += w * w * p.dim() as f64 / dim;
    }
    Ok(MacroObservableDeviation {
        lhs: (expectation - trace_avg).abs(),
        rhs_scale: trace_sq_avg.sqrt(),
    })
}

// ---------------------------------------------------------------------------
// Worst-case search over the population simplex
// ---------------------------------------------------------------------------

/// `G` as a quadratic functional of the populations.
pub(crate) struct DeviationFunctional {
    /// `|P[a][b]|^2` with a zeroed diagonal.
    coupling: Array2<f64>,
    /// `P[a][a]`.
    diag: Array1<f64>,
    /// `d / D`.
    target: f64,
}

impl DeviationFunctional {
    pub(crate) fn from_overlaps(proj: &ProjectorOverlaps) -> Self {
        let dim = proj.total_dim();
        let mut coupling = Array2::zeros((dim, dim));
        let mut diag = Array1::zeros(dim);
        for a in 0..dim {
            diag[a] = proj.matrix()[[a, a]].re;
            for b in 0..dim {
                if a != b {
                    coupling[[a, b]] = proj.matrix()[[a, b]].norm_sqr();
                }
            }
        }
        Self {
            coupling,
            diag,
            target: proj.dim() as f64 / dim as f64,
        }
    }

    pub(crate) fn eval(&self, p: &[f64]) -> f64 {
        let p = ndarray::ArrayView1::from(p);
        let qp = self.coupling.dot(&p);
        let quad = p.dot(&qp);
        let dev = self.diag.dot(&p) - self.target;
        quad + dev * dev
    }

    fn grad(&self, p: &ndarray::ArrayView1<f64>) -> Array1<f64> {
        let mut g = self.coupling.dot(p) * 2.0;
        let dev = self.diag.dot(p) - self.target;
        g.scaled_add(2.0 * dev, &self.diag);
        g
    }

    fn vertex_value(&self, a: usize) -> f64 {
        let dev = self.diag[a] - self.target;
        dev * dev
    }
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_onto_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    let mut acc = 0.0;
    let mut tau = 0.0;
    let mut found = false;
    for (j, &u) in sorted.iter().enumerate() {
        acc += u;
        let candidate = (acc - 1.0) / (j as f64 + 1.0);
        if u - candidate > 0.0 {
            tau = candidate;
        } else {
            found = true;
            break;
        }
    }
    if !found {
        // all entries active
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Result of the worst-case search.
#[derive(Debug, Clone, Serialize)]
pub struct WorstCaseG {
    /// Best local maximum found; a certified lower bound on the true
    /// worst case (the certified upper bound is [`condition_value`]).
    pub g_max: f64,
    /// Populations attaining `g_max`.
    pub argmax_population: Vec<f64>,
}

pub const WORST_CASE_DEFAULT_STARTS: usize = 32;

/// Stream for the random simplex starts; fixed so the search is a pure
/// function of its arguments.
const WORST_CASE_SEED: SeedSpec = SeedSpec {
    master_seed: 0x57a7_e5ea_7c4b_1e55,
    stream_index: 0,
};

const ARMIJO: f64 = 1e-4;
const GRAD_MAP_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 10_000;

/// Maximizes `G` over the population simplex by multi-start projected
/// gradient ascent with backtracking line search. Starts are the 16
/// highest-scoring simplex vertices (by diagonal deviation) plus random
/// flat-Dirichlet points, `starts` in total. The returned maximum is a
/// lower bound on the true worst case and never exceeds
/// [`condition_value`].
pub fn worst_case_g(proj: &ProjectorOverlaps, starts: usize) -> WorstCaseG {
    let f = DeviationFunctional::from_overlaps(proj);
    let dim = proj.total_dim();
    let starts = starts.max(1);

    // Highest-scoring vertices first, deterministically tie-broken by index.
    let mut vertex_order: Vec<usize> = (0..dim).collect();
    vertex_order.sort_by(|&a, &b| {
        f.vertex_value(b)
            .partial_cmp(&f.vertex_value(a))
            .expect("finite values")
            .then(a.cmp(&b))
    });
    let n_vertex = vertex_order.len().min(16).min(starts);

    let mut best_value = f64::NEG_INFINITY;
    let mut best_point: Vec<f64> = Vec::new();
    let mut consider = |value: f64, point: Vec<f64>| {
        if value > best_value {
            best_value = value;
            best_point = point;
        }
    };

    let mut rng = WORST_CASE_SEED.rng();
    for s in 0..starts {
        let start: Vec<f64> = if s < n_vertex {
            let mut p = vec![0.0; dim];
            p[vertex_order[s]] = 1.0;
            p
        } else {
            // flat Dirichlet: normalized exponentials
            let mut p: Vec<f64> = (0..dim)
                .map(|_| -(1.0 - uniform_closed_open(&mut rng)).ln())
                .collect();
            let total: f64 = p.iter().sum();
            for x in &mut p {
                *x /= total;
            }
            p
        };
        let (value, point) = ascend(&f, start);
        consider(value, point);
    }

    debug_assert!(best_value <= condition_value(proj) + 1e-10);
    WorstCaseG {
        g_max: best_value,
        argmax_population: best_point,
    }
}

fn ascend(f: &DeviationFunctional, start: Vec<f64>) -> (f64, Vec<f64>) {
    let mut x = project_onto_simplex(&start);
    let mut fx = f.eval(&x);
    let mut step = 1.0_f64;
    for _ in 0..MAX_ITERS {
        let xv = ndarray::ArrayView1::from(&x[..]);
        let g = f.grad(&xv);
        let mut accepted = false;
        let mut alpha = step;
        for _ in 0..60 {
            let trial: Vec<f64> = x
                .iter()
                .zip(g.iter())
                .map(|(xi, gi)| xi + alpha * gi)
                .collect();
            let candidate = project_onto_simplex(&trial);
            let f_cand = f.eval(&candidate);
            let dir_deriv: f64 = g
                .iter()
                .zip(candidate.iter().zip(x.iter()))
                .map(|(gi, (ci, xi))| gi * (ci - xi))
                .sum();
            if f_cand >= fx + ARMIJO * dir_deriv {
                let move_norm: f64 = candidate
                    .iter()
                    .zip(x.iter())
                    .map(|(c, xi)| (c - xi) * (c - xi))
                    .sum::<f64>()
                    .sqrt();
                let converged = move_norm / alpha < GRAD_MAP_TOL;
                x = candidate;
                fx = f_cand;
                step = (alpha * 2.0).min(1e6);
                accepted = true;
                if converged {
                    return (fx, x);
                }
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-18 {
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    (fx, x)
}

// ---------------------------------------------------------------------------
// Per-block report assembly
// ---------------------------------------------------------------------------

/// One block of a [`NormalityReport`].
#[derive(Debug, Clone, Serialize)]
pub struct BlockNormality {
    pub block_index: usize,
    pub g_closed_form: f64,
    pub condition_value: f64,
    pub bound1: f64,
    pub bound2: f64,
    /// `G < bound` in the configured sense, which certifies normality.
    pub sufficient: bool,
    /// Measured fraction of sampled times inside the band, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_fraction: Option<f64>,
    /// Same fraction measured over a doubled horizon (convergence check).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_fraction_doubled_t: Option<f64>,
}

/// Per-block deviation statistics and bound comparisons for one instance.
#[derive(Debug, Clone, Serialize)]
pub struct NormalityReport {
    pub per_block: Vec<BlockNormality>,
    /// True when every block satisfies its sufficient condition.
    pub overall_normal: bool,
}

/// Time-sampling options for [`normality_report`].
#[derive(Debug, Clone, Copy)]
pub struct TimeFractionOptions {
    pub t_max: f64,
    pub n_samples: usize,
    pub seed: SeedSpec,
    /// Re-measure at `2 t_max` and report both fractions.
    pub convergence_check: bool,
}

/// Assembles the per-block normality report for a concrete instance:
/// closed-form `G`, condition value, both bounds, the sufficiency flag in
/// the configured sense, and (optionally) measured time fractions.
pub fn normality_report(
    state: &StateVector,
    spectrum: &EnergySpectrum,
    decomp: &MacroDecomposition,
    params: &NormalityParams,
    time: Option<TimeFractionOptions>,
) -> Result<NormalityReport> {
    let projs = crate::hilbert::all_projector_overlaps(decomp)?;
    let dim = decomp.dim();
    let populations = state.populations();

    let fractions = match time {
        Some(opts) => Some((
            time_fraction_normal(
                state,
                spectrum,
                &projs,
                params,
                opts.t_max,
                opts.n_samples,
                opts.seed,
            )?,
            if opts.convergence_check {
                Some(time_fraction_normal(
                    state,
                    spectrum,
                    &projs,
                    params,
                    2.0 * opts.t_max,
                    opts.n_samples,
                    opts.seed,
                )?)
            } else {
                None
            },
        )),
        None => None,
    };

    let mut per_block = Vec::with_capacity(projs.len());
    for (nu, proj) in projs.iter().enumerate() {
        let g = {
            require_spectrum_hypotheses(spectrum)?;
            DeviationFunctional::from_overlaps(proj).eval(&populations)
        };
        let cond = condition_value(proj);
        let bounds = normality_bounds(params, proj.dim(), dim);
        let gate = match params.sense {
            NormalitySense::VonNeumann => bounds.bound1,
            NormalitySense::Strong => bounds.bound2,
        };
        per_block.push(BlockNormality {
            block_index: nu,
            g_closed_form: g,
            condition_value: cond,
            bound1: bounds.bound1,
            bound2: bounds.bound2,
            sufficient: g < gate,
            time_fraction: fractions.as_ref().map(|(f, _)| f.per_block[nu]),
            time_fraction_doubled_t: fractions
                .as_ref()
                .and_then(|(_, f2)| f2.as_ref().map(|f| f.per_block[nu])),
        });
    }
    let overall_normal = per_block.iter().all(|b| b.sufficient);
    Ok(NormalityReport {
        per_block,
        overall_normal,
    })
}

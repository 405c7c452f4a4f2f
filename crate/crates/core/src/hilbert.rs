//! Core domain types and exact state/projector computations in a
//! finite-dimensional Hilbert space.
//!
//! Everything is represented in the energy eigenbasis, so the reference
//! Hamiltonian is diagonal and never materialized as a matrix. States are
//! coefficient vectors `c_alpha`, macro-decompositions are carried by the
//! alignment unitary `W` with `W[gamma][alpha] = <phi_alpha | omega_gamma>`,
//! and a macro-projector enters only through its overlap matrix
//! `P[alpha][beta] = <phi_alpha| P_nu |phi_beta>`.

use std::ops::Range;
use std::sync::OnceLock;

use ndarray::{s, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::SpectrumReport;

/// Constructors reject violations above this tolerance.
pub const CONSTRUCT_TOL: f64 = 1e-8;
/// Internal assertions and cheap invariant checks use this tolerance.
pub const INTERNAL_TOL: f64 = 1e-10;

/// Ordered list of `D` real eigenvalues with tolerance metadata used for
/// degeneracy and resonance detection (dimensionless energy units, hbar = 1).
#[derive(Debug, Serialize, Deserialize)]
pub struct EnergySpectrum {
    energies: Vec<f64>,
    degeneracy_tol: f64,
    resonance_tol: f64,
    #[serde(skip)]
    report: OnceLock<SpectrumReport>,
}

impl Clone for EnergySpectrum {
    fn clone(&self) -> Self {
        Self {
            energies: self.energies.clone(),
            degeneracy_tol: self.degeneracy_tol,
            resonance_tol: self.resonance_tol,
            report: OnceLock::new(),
        }
    }
}

impl EnergySpectrum {
    /// Relative factor for the default tolerances: `1e-9 * (E_max - E_min)`.
    pub const DEFAULT_TOL_FACTOR: f64 = 1e-9;

    /// Builds a spectrum from raw energies. The list is sorted into
    /// non-decreasing order; entries must be finite and `D >= 2`.
    pub fn new(mut energies: Vec<f64>, degeneracy_tol: f64, resonance_tol: f64) -> Result<Self> {
        if energies.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "energies: need at least 2 eigenvalues, got {}",
                energies.len()
            )));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidArgument(
                "energies: all entries must be finite".into(),
            ));
        }
        if !(degeneracy_tol >= 0.0) || !(resonance_tol >= 0.0) {
            return Err(Error::InvalidArgument(
                "tolerances must be non-negative".into(),
            ));
        }
        energies.sort_by(|a, b| a.partial_cmp(b).expect("finite energies"));
        Ok(Self {
            energies,
            degeneracy_tol,
            resonance_tol,
            report: OnceLock::new(),
        })
    }

    /// Builds a spectrum with both tolerances set to
    /// `DEFAULT_TOL_FACTOR * (E_max - E_min)`.
    pub fn with_default_tolerances(energies: Vec<f64>) -> Result<Self> {
        let (min, max) = energies
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
                (lo.min(e), hi.max(e))
            });
        let tol = Self::DEFAULT_TOL_FACTOR * (max - min);
        Self::new(energies, tol, tol)
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn degeneracy_tol(&self) -> f64 {
        self.degeneracy_tol
    }

    pub fn resonance_tol(&self) -> f64 {
        self.resonance_tol
    }

    /// Degeneracy/resonance report, computed on first use and cached.
    pub fn report(&self) -> &SpectrumReport {
        self.report
            .get_or_init(|| crate::spectra::check_spectrum(self))
    }
}

/// Dense `D x D` unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    entries: Array2<Complex64>,
}

impl UnitaryMatrix {
    /// Validates `U U^dag = I` entrywise within [`CONSTRUCT_TOL`].
    pub fn new(entries: Array2<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "unitary matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let u = Self { entries };
        let dev = u.max_unitarity_deviation();
        if dev > CONSTRUCT_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(u)
    }

    /// For matrices whose rows are orthonormal by construction (sampling).
    pub(crate) fn from_orthonormal_rows(entries: Array2<Complex64>) -> Self {
        debug_assert_eq!(entries.nrows(), entries.ncols());
        Self { entries }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: Array2::eye(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    /// `max_ij |(U U^dag - I)_ij|`, the testable unitarity defect.
    pub fn max_unitarity_deviation(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..d {
            let row_i = self.entries.row(i);
            for j in i..d {
                let row_j = self.entries.row(j);
                let mut acc = Complex64::new(0.0, 0.0);
                for (a, b) in row_i.iter().zip(row_j.iter()) {
                    acc += a * b.conj();
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).norm());
            }
        }
        worst
    }
}

/// Normalized state in the energy eigenbasis: the coefficients
/// `c_alpha = <phi_alpha | psi_0>`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    coeffs: Vec<Complex64>,
}

impl StateVector {
    /// Rejects coefficient lists whose squared norm deviates from 1 by more
    /// than [`CONSTRUCT_TOL`], then rescales so the stored norm is exact to
    /// machine precision.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("state: dimension 0".into()));
        }
        let norm_sq: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if !norm_sq.is_finite() || (norm_sq - 1.0).abs() > CONSTRUCT_TOL {
            return Err(Error::NotNormalized((norm_sq - 1.0).abs()));
        }
        let scale = 1.0 / norm_sq.sqrt();
        let coeffs = coeffs.into_iter().map(|c| c * scale).collect();
        Ok(Self { coeffs })
    }

    /// The energy eigenstate `e_alpha`.
    pub fn eigenstate(dim: usize, alpha: usize) -> Result<Self> {
        if alpha >= dim {
            return Err(Error::InvalidArgument(format!(
                "eigenstate index {alpha} out of range for dimension {dim}"
            )));
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); dim];
        coeffs[alpha] = Complex64::new(1.0, 0.0);
        Ok(Self { coeffs })
    }

    /// State with the given populations and real non-negative coefficients.
    pub fn from_populations(populations: &[f64]) -> Result<Self> {
        Self::new(
            populations
                .iter()
                .map(|&p| Complex64::new(p.max(0.0).sqrt(), 0.0))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Populations `p_alpha = |c_alpha|^2`.
    pub fn populations(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Orthogonal decomposition of the space into `N` macro-spaces, carried by
/// the block dimensions `d_nu` and the alignment unitary `W` with
/// `W[gamma][alpha] = <phi_alpha | omega_gamma>`. The index sets are the
/// fixed consecutive partition `J_1 = {0..d_1}`, `J_2 = {d_1..d_1+d_2}`, ...
#[derive(Debug, Clone)]
pub struct MacroDecomposition {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    alignment: UnitaryMatrix,
}

impl MacroDecomposition {
    pub fn new(dims: Vec<usize>, alignment: UnitaryMatrix) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidArgument("dims: empty decomposition".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(
                "dims: every block dimension must be positive".into(),
            ));
        }
        let total: usize = dims.iter().sum();
        if total != alignment.dim() {
            return Err(Error::InvalidArgument(format!(
                "dims: sum {} does not match dimension {}",
                total,
                alignment.dim()
            )));
        }
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &d in &dims {
            acc += d;
            offsets.push(acc);
        }
        Ok(Self {
            dims,
            offsets,
            alignment,
        })
    }

    /// Decomposition aligned with the energy eigenbasis (`W = I`).
    pub fn aligned(dims: Vec<usize>) -> Result<Self> {
        let total: usize = dims.iter().sum();
        Self::new(dims, UnitaryMatrix::identity(total))
    }

    pub fn dim(&self) -> usize {
        self.alignment.dim()
    }

    /// Number of blocks `N`.
    pub fn blocks(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn alignment(&self) -> &UnitaryMatrix {
        &self.alignment
    }

    /// Index range `J_nu` in the macro basis.
    pub fn block_range(&self, nu: usize) -> Result<Range<usize>> {
        if nu >= self.dims.len() {
            return Err(Error::InvalidBlockIndex {
                index: nu,
                blocks: self.dims.len(),
            });
        }
        Ok(self.offsets[nu]..self.offsets[nu + 1])
    }
}

/// Overlap data of one macro-projector in the energy eigenbasis: the full
/// Hermitian matrix `P[alpha][beta] = <phi_alpha| P_nu |phi_beta>` plus the
/// `d_nu x D` factor (the rows of `W` belonging to `J_nu`) through which
/// `P = A^T conj(A)`. The factor gives `O(d_nu * D)` occupation evaluations.
#[derive(Debug, Clone)]
pub struct ProjectorOverlaps {
    block_index: usize,
    dim: usize,
    matrix: Array2<Complex64>,
    factor: Array2<Complex64>,
}

impl ProjectorOverlaps {
    pub fn block_index(&self) -> usize {
        self.block_index
    }

    /// Block dimension `d_nu`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total dimension `D`.
    pub fn total_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    /// Diagonal entries `P[alpha][alpha]` (real parts; the imaginary parts
    /// vanish identically by construction).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.total_dim()).map(|a| self.matrix[[a, a]].re).collect()
    }

    /// `trace(P) - d_nu`, which must vanish within 1e-8.
    pub fn trace_defect(&self) -> f64 {
        let tr: f64 = (0..self.total_dim()).map(|a| self.matrix[[a, a]].re).sum();
        tr - self.dim as f64
    }

    /// `max |(P^2 - P)_ij|`. O(D^3); used by tests, not constructors.
    pub fn idempotency_defect(&self) -> f64 {
        let sq = self.matrix.dot(&self.matrix);
        let mut worst = 0.0_f64;
        for (a, b) in sq.iter().zip(self.matrix.iter()) {
            worst = worst.max((a - b).norm());
        }
        worst
    }

    /// `max |(P - P^dag)_ij|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.total_dim();
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.matrix[[i, j]] - self.matrix[[j, i]].conj()).norm());
            }
        }
        worst
    }

    /// Occupation for an already phase-weighted coefficient vector
    /// `u_alpha = c_alpha * exp(-i E_alpha t)`: computes
    /// `sum_gamma |sum_alpha conj(A[gamma][alpha]) u_alpha|^2` in
    /// `O(d_nu * D)`.
    pub(crate) fn occupation_from_weighted(&self, weighted: &[Complex64]) -> f64 {
        let mut total = 0.0;
        for row in self.factor.outer_iter() {
            let mut amp = Complex64::new(0.0, 0.0);
            for (a, u) in row.iter().zip(weighted.iter()) {
                amp += a.conj() * u;
            }
            total += amp.norm_sqr();
        }
        total
    }
}

/// Builds the overlap matrix of macro-projector `nu`:
/// `P[alpha][beta] = sum_{gamma in J_nu} W[gamma][alpha] conj(W[gamma][beta])`.
pub fn build_projector_overlaps(
    decomp: &MacroDecomposition,
    nu: usize,
) -> Result<ProjectorOverlaps> {
    let range = decomp.block_range(nu)?;
    let factor = decomp
        .alignment()
        .entries()
        .slice(s![range.clone(), ..])
        .to_owned();
    Ok(projector_from_factor(nu, factor))
}

/// Builds the overlaps of every block: `all[nu]` is block `nu`.
pub fn all_projector_overlaps(decomp: &MacroDecomposition) -> Result<Vec<ProjectorOverlaps>> {
    (0..decomp.blocks())
        .map(|nu| build_projector_overlaps(decomp, nu))
        .collect()
}

/// Assembles `ProjectorOverlaps` from the `d x D` factor rows alone.
pub(crate) fn projector_from_factor(nu: usize, factor: Array2<Complex64>) -> ProjectorOverlaps {
    let conj = factor.mapv(|z| z.conj());
    let matrix = factor.t().dot(&conj);
    let p = ProjectorOverlaps {
        block_index: nu,
        dim: factor.nrows(),
        matrix,
        factor,
    };
    debug_assert!(p.hermiticity_defect() <= 1e-12);
    debug_assert!(p.trace_defect().abs() <= CONSTRUCT_TOL);
    p
}

fn check_same_dim(state: &StateVector, proj: &ProjectorOverlaps) -> Result<()> {
    if state.dim() != proj.total_dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has dimension {} but projector overlaps have dimension {}",
            state.dim(),
            proj.total_dim()
        )));
    }
    Ok(())
}

/// Instantaneous occupation `||P_nu psi_t||^2` of macro-space `nu` at time
/// `t`, evaluated as `sum_{alpha,beta} c*_a c_b e^{i(E_a - E_b)t} P[a][b]`
/// through the factored `O(d_nu * D)` route. The result is a norm, hence
/// exactly real and in `[0, 1]` up to roundoff.
pub fn macro_occupation_at_time(
    state: &StateVector,
    spectrum: &EnergySpectrum,
    proj: &ProjectorOverlaps,
    t: f64,
) -> Result<f64> {
    check_same_dim(state, proj)?;
    if spectrum.dim() != state.dim() {
        return Err(Error::DimensionMismatch(format!(
            "spectrum has dimension {} but state has dimension {}",
            spectrum.dim(),
            state.dim()
        )));
    }
    let weighted = phase_weighted(state, spectrum, t);
    let occ = proj.occupation_from_weighted(&weighted);
    debug_assert!((-INTERNAL_TOL..=1.0 + INTERNAL_TOL).contains(&occ));
    Ok(occ)
}

/// `u_alpha = c_alpha * exp(-i E_alpha t)`.
pub(crate) fn phase_weighted(
    state: &StateVector,
    spectrum: &EnergySpectrum,
    t: f64,
) -> Vec<Complex64> {
    state
        .coeffs()
        .iter()
        .zip(spectrum.energies())
        .map(|(c, &e)| {
            let phase = -e * t;
            c * Complex64::new(phase.cos(), phase.sin())
        })
        .collect()
}

/// Infinite-time average of the occupation for a non-degenerate spectrum:
/// `sum_alpha p_alpha P[alpha][alpha]`. The caller is responsible for the
/// non-degeneracy hypothesis (see the spectra module).
pub fn time_averaged_occupation(state: &StateVector, proj: &ProjectorOverlaps) -> Result<f64> {
    check_same_dim(state, proj)?;
    let diag = proj.diagonal();
    Ok(state
        .populations()
        .iter()
        .zip(diag.iter())
        .map(|(p, q)| p * q)
        .sum())
}

/// Participation sum `sum_alpha |c_alpha|^4` and effective dimension
/// `d_eff = 1 / participation_sum` (how many eigenstates contribute).
pub fn effective_dimension(state: &StateVector) -> (f64, f64) {
    let participation_sum: f64 = state.coeffs().iter().map(|c| c.norm_sqr().powi(2)).sum();
    (participation_sum, 1.0 / participation_sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_level_superposition() -> MacroDecomposition {
        // omega_1 = (phi_1 + phi_2)/sqrt(2), omega_2 = (phi_1 - phi_2)/sqrt(2)
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let w = Array2::from_shape_vec(
            (2, 2),
            vec![
                Complex64::new(s, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(-s, 0.0),
            ],
        )
        .unwrap();
        MacroDecomposition::new(vec![1, 1], UnitaryMatrix::new(w).unwrap()).unwrap()
    }

    #[test]
    fn aligned_projector_is_diagonal() {
        let decomp = MacroDecomposition::aligned(vec![1, 1]).unwrap();
        let p = build_projector_overlaps(&decomp, 0).unwrap();
        assert_eq!(p.matrix()[[0, 0]], Complex64::new(1.0, 0.0));
        assert_eq!(p.matrix()[[1, 1]], Complex64::new(0.0, 0.0));
        assert_eq!(p.matrix()[[0, 1]], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn full_space_block_is_identity() {
        let d = 5;
        let decomp = MacroDecomposition::aligned(vec![d]).unwrap();
        let p = build_projector_overlaps(&decomp, 0).unwrap();
        for i in 0..d {
            for j in 0..d {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((p.matrix()[[i, j]] - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn superposition_block_is_rank_one() {
        let p = build_projector_overlaps(&two_level_superposition(), 0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (p.matrix()[[i, j]] - Complex64::new(0.5, 0.0)).norm() < 1e-14,
                    "entry ({i},{j}) = {}",
                    p.matrix()[[i, j]]
                );
            }
        }
        assert!(p.idempotency_defect() < 1e-12);
        assert!(p.trace_defect().abs() < 1e-12);
    }

    #[test]
    fn invalid_block_index_rejected() {
        let decomp = MacroDecomposition::aligned(vec![1, 1]).unwrap();
        assert!(matches!(
            build_projector_overlaps(&decomp, 2),
            Err(Error::InvalidBlockIndex { index: 2, blocks: 2 })
        ));
    }

    #[test]
    fn occupation_identity_projector_is_one() {
        let decomp = MacroDecomposition::aligned(vec![3]).unwrap();
        let p = build_projector_overlaps(&decomp, 0).unwrap();
        let spectrum = EnergySpectrum::new(vec![0.0, 1.0, 3.0], 0.0, 0.0).unwrap();
        let state = StateVector::new(vec![
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.8),
            Complex64::new(0.0, 0.0),
        ])
        .unwrap();
        for &t in &[0.0, 0.37, 12.5] {
            let occ = macro_occupation_at_time(&state, &spectrum, &p, t).unwrap();
            assert!((occ - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_level_interference() {
        let delta = 1.3;
        let spectrum = EnergySpectrum::new(vec![0.0, delta], 0.0, 0.0).unwrap();
        let p = build_projector_overlaps(&two_level_superposition(), 0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let state =
            StateVector::new(vec![Complex64::new(s, 0.0), Complex64::new(s, 0.0)]).unwrap();
        let occ0 = macro_occupation_at_time(&state, &spectrum, &p, 0.0).unwrap();
        assert!((occ0 - 1.0).abs() < 1e-12);
        let occ_half = macro_occupation_at_time(&state, &spectrum, &p, std::f64::consts::PI / delta)
            .unwrap();
        assert!(occ_half.abs() < 1e-12);
        for &t in &[0.1, 0.9, 4.0, 17.3] {
            let occ = macro_occupation_at_time(&state, &spectrum, &p, t).unwrap();
            let expect = 0.5 + 0.5 * (delta * t).cos();
            assert!((occ - expect).abs() < 1e-12, "t={t}: {occ} vs {expect}");
        }
    }

    #[test]
    fn eigenstate_occupation_is_stationary() {
        let spectrum = EnergySpectrum::new(vec![0.0, 1.0], 0.0, 0.0).unwrap();
        let p = build_projector_overlaps(&two_level_superposition(), 0).unwrap();
        let state = StateVector::eigenstate(2, 0).unwrap();
        let expect = p.matrix()[[0, 0]].re;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..100 {
            let occ = macro_occupation_at_time(&state, &spectrum, &p, 0.173 * k as f64).unwrap();
            lo = lo.min(occ);
            hi = hi.max(occ);
        }
        assert!(hi - lo <= 1e-10);
        assert!((lo - expect).abs() < 1e-12);
    }

    #[test]
    fn time_average_examples() {
        let decomp = MacroDecomposition::aligned(vec![4]).unwrap();
        let p = build_projector_overlaps(&decomp, 0).unwrap();
        let state = StateVector::new(vec![Complex64::new(0.5, 0.0); 4]).unwrap();
        assert!((time_averaged_occupation(&state, &p).unwrap() - 1.0).abs() < 1e-12);

        // uniform populations -> trace(P)/D = d/D
        let decomp = MacroDecomposition::aligned(vec![1, 3]).unwrap();
        let p = build_projector_overlaps(&decomp, 0).unwrap();
        assert!((time_averaged_occupation(&state, &p).unwrap() - 0.25).abs() < 1e-12);

        // diagonal readout of the superposition projector
        let p = build_projector_overlaps(&two_level_superposition(), 0).unwrap();
        let state = StateVector::eigenstate(2, 0).unwrap();
        assert!((time_averaged_occupation(&state, &p).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn effective_dimension_examples() {
        let d = 8;
        let c = Complex64::new((1.0 / d as f64).sqrt(), 0.0);
        let uniform = StateVector::new(vec![c; d]).unwrap();
        let (ps, deff) = effective_dimension(&uniform);
        assert!((ps - 1.0 / d as f64).abs() < 1e-12);
        assert!((deff - d as f64).abs() < 1e-9);

        let single = StateVector::eigenstate(d, 3).unwrap();
        let (ps, deff) = effective_dimension(&single);
        assert!((ps - 1.0).abs() < 1e-12);
        assert!((deff - 1.0).abs() < 1e-12);

        let state = StateVector::new(vec![
            Complex64::new((1.0_f64 / 3.0).sqrt(), 0.0),
            Complex64::new(0.0, (2.0_f64 / 3.0).sqrt()),
        ])
        .unwrap();
        let (ps, deff) = effective_dimension(&state);
        assert!((ps - 5.0 / 9.0).abs() < 1e-12);
        assert!((deff - 1.8).abs() < 1e-12);
    }

    #[test]
    fn state_normalization_contract() {
        // slightly off-normalized input is accepted and rescaled
        let c = Complex64::new(
            std::f64::consts::FRAC_1_SQRT_2 * (1.0 + 3e-9),
            0.0,
        );
        let state = StateVector::new(vec![c, c]).unwrap();
        let n: f64 = state.coeffs().iter().map(|c| c.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-15);

        // badly normalized input is rejected
        let bad = StateVector::new(vec![Complex64::new(1.0, 0.0), Complex64::new(0.1, 0.0)]);
        assert!(matches!(bad, Err(Error::NotNormalized(_))));
    }

    #[test]
    fn decomposition_validation() {
        assert!(MacroDecomposition::aligned(vec![]).is_err());
        assert!(MacroDecomposition::aligned(vec![2, 0, 1]).is_err());
        let w = UnitaryMatrix::identity(4);
        assert!(MacroDecomposition::new(vec![2, 1], w).is_err());
    }

    #[test]
    fn unitarity_validation() {
        let mut m = Array2::eye(3);
        m[[0, 0]] = Complex64::new(1.0 + 1e-6, 0.0);
        assert!(matches!(UnitaryMatrix::new(m), Err(Error::NotUnitary(_))));
    }
}

//! Reproducibly seeded uniform sampling: Haar unitaries, states on the unit
//! sphere, macro-decompositions, spectrum-conjugated Hamiltonians, and the
//! exact overlap statistics they must reproduce.
//!
//! All randomness flows through [`SeedSpec`], a `(master_seed, stream_index)`
//! pair mapped onto independent ChaCha12 streams. Gaussians come from a fixed
//! Box-Muller transform on the generator's 53-bit uniforms, so identical
//! seeds give bit-identical samples on every platform and at every degree of
//! parallelism.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{EnergySpectrum, MacroDecomposition, StateVector, UnitaryMatrix};

/// Names one reproducible random stream.
///
/// Experiments assign `stream_index = k` to trial `k`; stream indices counted
/// down from `u64::MAX` are reserved for per-run global draws (spectrum,
/// pinned probe states, time-grid jitter), so the two ranges never collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    #[serde(default)]
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// The same master seed on a different stream.
    pub fn stream(&self, stream_index: u64) -> Self {
        Self {
            master_seed: self.master_seed,
            stream_index,
        }
    }

    /// Reserved stream for global (non-trial) draws; `slot` 0, 1, 2, ...
    pub fn global(&self, slot: u64) -> Self {
        self.stream(u64::MAX - slot)
    }

    /// Instantiates the generator for this stream.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

const TWO_POW_NEG53: f64 = 1.0 / ((1u64 << 53) as f64);

/// Uniform in `(0, 1]` from the top 53 bits.
fn uniform_open_closed(rng: &mut ChaCha12Rng) -> f64 {
    (((rng.next_u64() >> 11) + 1) as f64) * TWO_POW_NEG53
}

/// Uniform in `[0, 1)` from the top 53 bits.
pub(crate) fn uniform_closed_open(rng: &mut ChaCha12Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64) * TWO_POW_NEG53
}

/// One standard complex Gaussian (`E|z|^2 = 1`) via Box-Muller: two 53-bit
/// uniforms per draw, consumed in a fixed order.
pub(crate) fn complex_gaussian(rng: &mut ChaCha12Rng) -> Complex64 {
    let u1 = uniform_open_closed(rng);
    let u2 = uniform_closed_open(rng);
    let r = (-u1.ln()).sqrt(); // radius of N(0, 1/2) + i N(0, 1/2)
    let theta = std::f64::consts::TAU * u2;
    Complex64::new(r * theta.cos(), r * theta.sin())
}

/// Orthonormalizes the rows of `m` in place by modified Gram-Schmidt with a
/// second projection pass. The triangular factor's diagonal is the row norm,
/// hence real and positive; that sign convention is exactly what makes the
/// orthonormal factor of a Gaussian matrix Haar-distributed, so no extra
/// column-phase fix is needed beyond it.
fn orthonormalize_rows(m: &mut Array2<Complex64>) -> Result<()> {
    let rows = m.nrows();
    let cols = m.ncols();
    for i in 0..rows {
        for _pass in 0..2 {
            for j in 0..i {
                let mut proj = Complex64::new(0.0, 0.0);
                {
                    let (done, rest) = m.view().split_at(ndarray::Axis(0), i);
                    let qj = done.row(j);
                    let gi = rest.row(0);
                    for (q, g) in qj.iter().zip(gi.iter()) {
                        proj += q.conj() * g;
                    }
                }
                let qj = m.row(j).to_owned();
                let mut gi = m.row_mut(i);
                for (g, q) in gi.iter_mut().zip(qj.iter()) {
                    *g -= proj * q;
                }
            }
        }
        let norm = m.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "orthonormalization broke down at row {i} (norm {norm})"
            )));
        }
        let inv = 1.0 / norm;
        for g in m.row_mut(i).iter_mut() {
            *g *= inv;
        }
        let _ = cols;
    }
    Ok(())
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha12Rng) -> Array2<Complex64> {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(complex_gaussian(rng));
    }
    Array2::from_shape_vec((rows, cols), data).expect("shape matches data length")
}

pub(crate) fn haar_unitary_with_rng(dim: usize, rng: &mut ChaCha12Rng) -> Result<UnitaryMatrix> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    let mut m = gaussian_matrix(dim, dim, rng);
    orthonormalize_rows(&mut m)?;
    Ok(UnitaryMatrix::from_orthonormal_rows(m))
}

/// Samples a Haar-distributed `dim x dim` unitary: a matrix of independent
/// standard complex Gaussians is orthonormalized with the positive-diagonal
/// triangular convention, which realizes exactly the Haar measure.
pub fn haar_unitary(dim: usize, seed: SeedSpec) -> Result<UnitaryMatrix> {
    haar_unitary_with_rng(dim, &mut seed.rng())
}

/// The first `k` rows of a Haar unitary (equivalently: a uniformly random
/// orthonormal `k`-frame). Statistics that depend only on one block's rows
/// use this marginal directly instead of paying for the full matrix.
pub fn stiefel_rows(k: usize, dim: usize, seed: SeedSpec) -> Result<Array2<Complex64>> {
    stiefel_rows_with_rng(k, dim, &mut seed.rng())
}

pub(crate) fn stiefel_rows_with_rng(
    k: usize,
    dim: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Array2<Complex64>> {
    if k == 0 || k > dim {
        return Err(Error::InvalidArgument(format!(
            "frame size {k} must lie in 1..={dim}"
        )));
    }
    let mut m = gaussian_matrix(k, dim, rng);
    orthonormalize_rows(&mut m)?;
    Ok(m)
}

pub(crate) fn uniform_state_with_rng(dim: usize, rng: &mut ChaCha12Rng) -> Result<StateVector> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    let mut coeffs: Vec<Complex64> = (0..dim).map(|_| complex_gaussian(rng)).collect();
    let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidArgument("degenerate Gaussian draw".into()));
    }
    let inv = 1.0 / norm;
    for c in &mut coeffs {
        *c *= inv;
    }
    StateVector::new(coeffs)
}

/// Uniform state on the unit sphere: `dim` independent standard complex
/// Gaussians, normalized.
pub fn uniform_state(dim: usize, seed: SeedSpec) -> Result<StateVector> {
    uniform_state_with_rng(dim, &mut seed.rng())
}

pub(crate) fn uniform_decomposition_with_rng(
    dims: &[usize],
    rng: &mut ChaCha12Rng,
) -> Result<MacroDecomposition> {
    let total: usize = dims.iter().sum();
    if dims.is_empty() || dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidArgument(
            "dims: every block dimension must be positive".into(),
        ));
    }
    let alignment = haar_unitary_with_rng(total, rng)?;
    MacroDecomposition::new(dims.to_vec(), alignment)
}

/// Uniformly random macro-decomposition with the given block dimensions:
/// Haar alignment basis, fixed consecutive index sets.
pub fn uniform_decomposition(dims: &[usize], seed: SeedSpec) -> Result<MacroDecomposition> {
    uniform_decomposition_with_rng(dims, &mut seed.rng())
}

/// Random Hamiltonian with the given fixed spectrum: returns the Haar
/// eigenbasis relating the eigenvectors to the fixed macro-basis. By the
/// inversion symmetry of the Haar measure, downstream code may equivalently
/// keep the eigenbasis fixed and treat the decomposition as random.
pub fn conjugated_hamiltonian(spectrum: &EnergySpectrum, seed: SeedSpec) -> Result<UnitaryMatrix> {
    haar_unitary(spectrum.dim(), seed)
}

/// Exact statistics of `||P_nu phi||^2` for a fixed `d`-dimensional subspace
/// and a uniform random state `phi` in dimension `dim`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OverlapStatistics {
    /// `E ||P phi||^2 = d / D`.
    pub mean: f64,
    /// `Var ||P phi||^2 = (1/d) (d/D)^2 (D - d) / (D + 1)`.
    pub variance: f64,
    /// Chebyshev guarantee: the overlap lies within `eps * d/D` of the mean
    /// with probability at least `1 - 1/(eps^2 d)`.
    pub chebyshev_lower_bound: f64,
}

/// Mean, variance, and the Chebyshev concentration bound of the uniform-state
/// overlap with a fixed subspace of dimension `d` out of `dim`.
pub fn overlap_statistics(d: usize, dim: usize, eps: f64) -> Result<OverlapStatistics> {
    if d == 0 || d > dim {
        return Err(Error::InvalidArgument(format!(
            "subspace dimension {d} must lie in 1..={dim}"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let q = d as f64 / dim as f64;
    let variance = q * q * (dim - d) as f64 / ((dim as f64 + 1.0) * d as f64);
    Ok(OverlapStatistics {
        mean: q,
        variance,
        chebyshev_lower_bound: 1.0 - 1.0 / (eps * eps * d as f64),
    })
}

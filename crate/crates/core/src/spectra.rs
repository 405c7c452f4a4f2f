//! Energy-spectrum generation and validation: degeneracy detection,
//! resonance detection, and the frequency-gap analysis used to choose time
//! horizons for empirical averages.
//!
//! A spectrum "has resonances" when two ordered eigenvalue differences
//! `E_a - E_b` (a != b) coincide apart from the trivial identifications
//! (same pair, or both differences zero). The closed-form time averages in
//! the normality module are only valid without degeneracies and resonances,
//! so operations that rely on them consult [`SpectrumReport`] first.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::EnergySpectrum;
use crate::sampling::{uniform_closed_open, SeedSpec};

/// An offending index tuple found by [`check_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumViolation {
    /// `|E_i - E_j| <= degeneracy_tol` for `i != j`.
    Degeneracy { i: usize, j: usize },
    /// `(E_a - E_b) - (E_c - E_d)` within `resonance_tol`, non-trivially.
    Resonance { a: usize, b: usize, c: usize, d: usize },
}

/// Outcome of the degeneracy/resonance scan.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub is_nondegenerate: bool,
    pub is_nonresonant: bool,
    /// Smallest nonzero `|E_a - E_b|`; zero when degenerate.
    pub min_gap: f64,
    /// Smallest nonzero spacing between distinct ordered differences; zero
    /// when resonant.
    pub min_frequency_separation: f64,
    /// Offending index tuples, capped at [`SpectrumReport::MAX_VIOLATIONS`].
    pub violations: Vec<SpectrumViolation>,
}

impl SpectrumReport {
    pub const MAX_VIOLATIONS: usize = 100;
}

/// Scans a spectrum for degeneracies (adjacent sorted energies within
/// `degeneracy_tol`) and resonances (coinciding ordered differences within
/// `resonance_tol`). Sorting the `D (D-1)` ordered differences once makes the
/// scan `O(D^2 log D)`; trivial coincidences are excluded by construction
/// because every ordered pair with `a != b` is enumerated exactly once.
pub fn check_spectrum(spectrum: &EnergySpectrum) -> SpectrumReport {
    let energies = spectrum.energies();
    let n = energies.len();
    let mut violations = Vec::new();

    // Degeneracy scan over adjacent sorted energies.
    let mut is_nondegenerate = true;
    let mut min_gap = f64::INFINITY;
    for i in 0..n - 1 {
        let gap = energies[i + 1] - energies[i];
        if gap <= spectrum.degeneracy_tol() {
            is_nondegenerate = false;
            if violations.len() < SpectrumReport::MAX_VIOLATIONS {
                violations.push(SpectrumViolation::Degeneracy { i, j: i + 1 });
            }
        } else {
            min_gap = min_gap.min(gap);
        }
    }
    if !is_nondegenerate {
        min_gap = 0.0;
    }

    // Resonance scan over all ordered differences, both signs.
    let mut diffs: Vec<(f64, u32, u32)> = Vec::with_capacity(n * (n - 1));
    for a in 0..n {
        for b in 0..n {
            if a != b {
                diffs.push((energies[a] - energies[b], a as u32, b as u32));
            }
        }
    }
    diffs.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite differences"));

    let mut is_nonresonant = true;
    let mut min_separation = f64::INFINITY;
    for w in diffs.windows(2) {
        let (v0, a0, b0) = w[0];
        let (v1, a1, b1) = w[1];
        let sep = v1 - v0;
        if sep <= spectrum.resonance_tol() {
            is_nonresonant = false;
            if violations.len() < SpectrumReport::MAX_VIOLATIONS {
                violations.push(SpectrumViolation::Resonance {
                    a: a0 as usize,
                    b: b0 as usize,
                    c: a1 as usize,
                    d: b1 as usize,
                });
            }
        } else {
            min_separation = min_separation.min(sep);
        }
    }
    if !is_nonresonant {
        min_separation = 0.0;
    }

    SpectrumReport {
        is_nondegenerate,
        is_nonresonant,
        min_gap,
        min_frequency_separation: min_separation,
        violations,
    }
}

/// Draws `dim` energies i.i.d. uniform on `[0, span]`, sorted, with the
/// default relative tolerances, redrawing (up to 100 attempts) until the
/// result is non-degenerate and non-resonant. For continuous draws and
/// tolerances far below `span / dim^2` a redraw is practically unreachable.
pub fn generate_nonresonant_spectrum(
    dim: usize,
    seed: SeedSpec,
    span: f64,
) -> Result<EnergySpectrum> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!(
            "dimension {dim} must be at least 2"
        )));
    }
    if !(span > 0.0) || !span.is_finite() {
        return Err(Error::InvalidArgument("span must be positive".into()));
    }
    const MAX_ATTEMPTS: usize = 100;
    let mut rng = seed.rng();
    for _ in 0..MAX_ATTEMPTS {
        let energies: Vec<f64> = (0..dim)
            .map(|_| span * uniform_closed_open(&mut rng))
            .collect();
        let spectrum = EnergySpectrum::with_default_tolerances(energies)?;
        let report = spectrum.report();
        if report.is_nondegenerate && report.is_nonresonant {
            return Ok(spectrum);
        }
    }
    Err(Error::GenerationFailed(MAX_ATTEMPTS))
}

/// Time horizons for empirical averaging, in units of oscillation cycles.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimeHorizon {
    /// `cycles * 2 pi / min_gap`: long enough that every occupation
    /// frequency completes `cycles` full periods.
    pub t_occupation: f64,
    /// `cycles * 2 pi / min_frequency_separation`: long enough that the
    /// slowest beat in squared deviations completes `cycles` periods.
    pub t_deviation: f64,
}

pub const DEFAULT_HORIZON_CYCLES: u32 = 200;

/// Averaging horizons chosen from the spectrum's frequency-gap analysis.
/// Degenerate spectra have no occupation horizon; resonant spectra have no
/// deviation horizon.
pub fn time_horizon(spectrum: &EnergySpectrum, cycles: u32) -> Result<TimeHorizon> {
    let report = spectrum.report();
    if !report.is_nondegenerate {
        return Err(Error::DegenerateSpectrum);
    }
    if !report.is_nonresonant {
        return Err(Error::ResonantSpectrum);
    }
    let c = cycles as f64 * std::f64::consts::TAU;
    Ok(TimeHorizon {
        t_occupation: c / report.min_gap,
        t_deviation: c / report.min_frequency_separation,
    })
}

/// Occupation horizon alone; valid for any non-degenerate spectrum, resonant
/// or not.
pub fn occupation_horizon(spectrum: &EnergySpectrum, cycles: u32) -> Result<f64> {
    let report = spectrum.report();
    if !report.is_nondegenerate {
        return Err(Error::DegenerateSpectrum);
    }
    Ok(cycles as f64 * std::f64::consts::TAU / report.min_gap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum(e: &[f64]) -> EnergySpectrum {
        EnergySpectrum::new(e.to_vec(), 1e-9, 1e-9).unwrap()
    }

    #[test]
    fn equally_spaced_spectrum_is_resonant() {
        let report = check_spectrum(&spectrum(&[0.0, 1.0, 2.0]));
        assert!(report.is_nondegenerate);
        assert!(!report.is_nonresonant);
        assert_eq!(report.min_frequency_separation, 0.0);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, SpectrumViolation::Resonance { .. })));
    }

    #[test]
    fn repeated_eigenvalue_is_degenerate() {
        let report = check_spectrum(&spectrum(&[0.0, 0.0, 1.0]));
        assert!(!report.is_nondegenerate);
        assert_eq!(report.min_gap, 0.0);
    }

    #[test]
    fn golden_three_level_example() {
        let report = check_spectrum(&spectrum(&[0.0, 1.0, 3.0]));
        assert!(report.is_nondegenerate);
        assert!(report.is_nonresonant);
        assert!((report.min_gap - 1.0).abs() < 1e-12);
        assert!((report.min_frequency_separation - 1.0).abs() < 1e-12);
        assert!(report.violations.is_empty());
    }

    #[test]
    fn two_levels_never_resonate() {
        for &(a, b) in &[(0.0, 1.0), (-3.0, 7.5), (0.0, 1e-6)] {
            let report = check_spectrum(&EnergySpectrum::new(vec![a, b], 1e-12, 1e-12).unwrap());
            assert!(report.is_nonresonant, "({a},{b})");
        }
    }

    #[test]
    fn shift_invariance_and_scale_equivariance() {
        let base = [0.13, 0.98, 2.31, 5.05];
        let r0 = check_spectrum(&spectrum(&base));
        let shifted: Vec<f64> = base.iter().map(|e| e + 11.7).collect();
        let r1 = check_spectrum(&spectrum(&shifted));
        assert_eq!(r0.is_nondegenerate, r1.is_nondegenerate);
        assert_eq!(r0.is_nonresonant, r1.is_nonresonant);
        assert!((r0.min_gap - r1.min_gap).abs() < 1e-9);
        assert!((r0.min_frequency_separation - r1.min_frequency_separation).abs() < 1e-9);

        let scaled: Vec<f64> = base.iter().map(|e| 3.0 * e).collect();
        let r2 = check_spectrum(&spectrum(&scaled));
        assert_eq!(r0.is_nonresonant, r2.is_nonresonant);
        assert!((3.0 * r0.min_gap - r2.min_gap).abs() < 1e-9);
        assert!(
            (3.0 * r0.min_frequency_separation - r2.min_frequency_separation).abs() < 1e-9
        );
    }

    #[test]
    fn generated_spectra_pass_their_own_check() {
        for dim in [2, 3, 17, 50] {
            for stream in 0..3 {
                let s =
                    generate_nonresonant_spectrum(dim, SeedSpec::new(2024, stream), 100.0).unwrap();
                let report = s.report();
                assert!(report.is_nondegenerate && report.is_nonresonant, "dim {dim}");
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_nonresonant_spectrum(12, SeedSpec::new(7, 1), 50.0).unwrap();
        let b = generate_nonresonant_spectrum(12, SeedSpec::new(7, 1), 50.0).unwrap();
        assert_eq!(a.energies(), b.energies());
    }

    #[test]
    fn horizons_from_golden_example() {
        let s = spectrum(&[0.0, 1.0, 3.0]);
        let h = time_horizon(&s, 200).unwrap();
        assert!((h.t_occupation - 400.0 * std::f64::consts::PI).abs() < 1e-9);
        assert!((h.t_deviation - 400.0 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn doubling_the_span_halves_the_horizons() {
        let s1 = spectrum(&[0.0, 1.0, 3.0]);
        let s2 = spectrum(&[0.0, 2.0, 6.0]);
        let h1 = time_horizon(&s1, 200).unwrap();
        let h2 = time_horizon(&s2, 200).unwrap();
        assert!((h1.t_occupation / h2.t_occupation - 2.0).abs() < 1e-12);
        assert!((h1.t_deviation / h2.t_deviation - 2.0).abs() < 1e-12);
    }

    #[test]
    fn horizon_errors() {
        assert!(matches!(
            time_horizon(&spectrum(&[0.0, 1.0, 2.0]), 200),
            Err(Error::ResonantSpectrum)
        ));
        assert!(matches!(
            time_horizon(&spectrum(&[0.0, 0.0, 1.0]), 200),
            Err(Error::DegenerateSpectrum)
        ));
        // resonant but non-degenerate still has an occupation horizon
        assert!(occupation_horizon(&spectrum(&[0.0, 1.0, 2.0]), 200).is_ok());
    }

    #[test]
    fn brute_force_resonance_oracle_agrees() {
        // O(D^4) pairwise comparison on small random spectra.
        fn brute_force_resonant(s: &EnergySpectrum) -> bool {
            let e = s.energies();
            let n = e.len();
            for a in 0..n {
                for b in 0..n {
                    if a == b {
                        continue;
                    }
                    for c in 0..n {
                        for d in 0..n {
                            if c == d || (a == c && b == d) {
                                continue;
                            }
                            if ((e[a] - e[b]) - (e[c] - e[d])).abs() <= s.resonance_tol() {
                                return true;
                            }
                        }
                    }
                }
            }
            false
        }

        let mut rng = SeedSpec::new(55, 0).rng();
        for trial in 0..50 {
            let dim = 2 + (trial % 11);
            let energies: Vec<f64> = (0..dim)
                .map(|_| 10.0 * uniform_closed_open(&mut rng))
                .collect();
            let s = EnergySpectrum::new(energies, 1e-9, 1e-9).unwrap();
            let report = check_spectrum(&s);
            assert_eq!(report.is_nonresonant, !brute_force_resonant(&s), "trial {trial}");
        }
        // and on a known resonant one
        let s = spectrum(&[0.0, 1.0, 2.0]);
        assert!(brute_force_resonant(&s));
        assert!(!check_spectrum(&s).is_nonresonant);
    }
}

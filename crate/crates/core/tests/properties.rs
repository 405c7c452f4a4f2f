//! Property-based invariants: completeness of the projector family,
//! occupation ranges and sum rules, the deviation inequality chain, and
//! determinism of every sampling operation.

mod common;

use proptest::prelude::*;

use ntlab_core::hilbert::{all_projector_overlaps, effective_dimension, macro_occupation_at_time};
use ntlab_core::normality::{condition_value, deviation_g, worst_case_g};
use ntlab_core::sampling::{
    haar_unitary, uniform_decomposition, uniform_state, SeedSpec,
};
use ntlab_core::spectra::{check_spectrum, generate_nonresonant_spectrum, occupation_horizon};
use ntlab_core::typicality::wilson_interval;
use ntlab_core::{time_averaged_occupation, EnergySpectrum};

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=8, 1..=5).prop_filter("need D >= 2", |d| d.iter().sum::<usize>() >= 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projectors_sum_to_identity(dims in dims_strategy(), master in any::<u64>()) {
        let total: usize = dims.iter().sum();
        let decomp = uniform_decomposition(&dims, SeedSpec::new(master, 0)).unwrap();
        let projs = all_projector_overlaps(&decomp).unwrap();
        for i in 0..total {
            for j in 0..total {
                let sum: num_complex::Complex64 =
                    projs.iter().map(|p| p.matrix()[[i, j]]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                prop_assert!(
                    (sum - expect).norm() < 1e-8,
                    "entry ({i},{j}) sums to {sum}"
                );
            }
        }
        for p in &projs {
            prop_assert!(p.hermiticity_defect() < 1e-12);
            prop_assert!(p.idempotency_defect() < 1e-10);
            prop_assert!(p.trace_defect().abs() < 1e-8);
            for q in p.diagonal() {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&q));
            }
        }
    }

    #[test]
    fn occupations_stay_in_range_and_sum_to_one(
        dims in dims_strategy(),
        master in any::<u64>(),
        t in -200.0f64..200.0,
    ) {
        let total: usize = dims.iter().sum();
        let seed = SeedSpec::new(master, 1);
        let decomp = uniform_decomposition(&dims, seed).unwrap();
        let projs = all_projector_overlaps(&decomp).unwrap();
        let spectrum = generate_nonresonant_spectrum(total, seed.stream(9), 25.0).unwrap();
        let state = uniform_state(total, seed.stream(2)).unwrap();
        let mut sum = 0.0;
        for p in &projs {
            let occ = macro_occupation_at_time(&state, &spectrum, p, t).unwrap();
            prop_assert!((-1e-10..=1.0 + 1e-10).contains(&occ), "occ {occ}");
            sum += occ;
        }
        prop_assert!((sum - 1.0).abs() < 1e-8, "sum {sum}");
    }

    #[test]
    fn deviation_chain_and_jensen(dims in dims_strategy(), master in any::<u64>()) {
        let total: usize = dims.iter().sum();
        let seed = SeedSpec::new(master, 3);
        let decomp = uniform_decomposition(&dims, seed).unwrap();
        let spectrum = generate_nonresonant_spectrum(total, seed.stream(9), 25.0).unwrap();
        let state = uniform_state(total, seed.stream(2)).unwrap();
        let projs = all_projector_overlaps(&decomp).unwrap();
        for p in &projs {
            let g = deviation_g(&state, &spectrum, p).unwrap();
            let worst = worst_case_g(p, 8);
            let cond = condition_value(p);
            prop_assert!(g <= worst.g_max + 1e-10, "g {g} > worst {}", worst.g_max);
            prop_assert!(worst.g_max <= cond + 1e-10, "worst {} > cond {cond}", worst.g_max);

            // time-average inequality: the squared mean deviation is at most
            // the mean squared deviation
            let q = p.dim() as f64 / total as f64;
            let tavg = time_averaged_occupation(&state, p).unwrap();
            prop_assert!((tavg - q).powi(2) <= g + 1e-15);
        }
    }

    #[test]
    fn spectrum_check_shift_and_scale(
        energies in prop::collection::vec(-40.0f64..40.0, 2..=10),
        shift in -30.0f64..30.0,
        scale in 0.1f64..10.0,
    ) {
        let base = EnergySpectrum::new(energies.clone(), 1e-9, 1e-9).unwrap();
        let r0 = check_spectrum(&base);

        let shifted: Vec<f64> = energies.iter().map(|e| e + shift).collect();
        let r1 = check_spectrum(&EnergySpectrum::new(shifted, 1e-9, 1e-9).unwrap());
        prop_assert_eq!(r0.is_nondegenerate, r1.is_nondegenerate);
        prop_assert_eq!(r0.is_nonresonant, r1.is_nonresonant);
        prop_assert!((r0.min_gap - r1.min_gap).abs() <= 1e-7 * (1.0 + r0.min_gap));

        // positive scaling scales the tolerances along with the energies
        let scaled: Vec<f64> = energies.iter().map(|e| scale * e).collect();
        let r2 = check_spectrum(&EnergySpectrum::new(scaled, scale * 1e-9, scale * 1e-9).unwrap());
        prop_assert_eq!(r0.is_nondegenerate, r2.is_nondegenerate);
        prop_assert_eq!(r0.is_nonresonant, r2.is_nonresonant);
        prop_assert!(
            (scale * r0.min_gap - r2.min_gap).abs() <= 1e-7 * (1.0 + scale * r0.min_gap)
        );
    }

    #[test]
    fn sampling_determinism(master in any::<u64>(), stream in any::<u64>()) {
        let seed = SeedSpec::new(master, stream);
        let u1 = haar_unitary(6, seed).unwrap();
        let u2 = haar_unitary(6, seed).unwrap();
        prop_assert_eq!(u1.entries(), u2.entries());

        let s1 = uniform_state(11, seed).unwrap();
        let s2 = uniform_state(11, seed).unwrap();
        prop_assert_eq!(s1.coeffs(), s2.coeffs());

        let sp1 = generate_nonresonant_spectrum(7, seed, 10.0).unwrap();
        let sp2 = generate_nonresonant_spectrum(7, seed, 10.0).unwrap();
        prop_assert_eq!(sp1.energies(), sp2.energies());
    }

    #[test]
    fn state_norm_and_effective_dimension(dim in 1usize..=64, master in any::<u64>()) {
        let state = uniform_state(dim, SeedSpec::new(master, 5)).unwrap();
        let norm: f64 = state.coeffs().iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((norm - 1.0).abs() < 1e-12);
        let (ps, deff) = effective_dimension(&state);
        prop_assert!(ps > 0.0);
        prop_assert!(deff >= 1.0 - 1e-9);
        prop_assert!(deff <= dim as f64 + 1e-9);
    }

    #[test]
    fn wilson_interval_is_well_formed(successes in 0usize..=50, extra in 0usize..=200) {
        let trials = successes + extra.max(1);
        let (lo, hi) = wilson_interval(successes, trials, 0.95).unwrap();
        let p = successes as f64 / trials as f64;
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!((0.0..=1.0).contains(&hi));
        prop_assert!(lo <= p + 1e-12);
        prop_assert!(hi >= p - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn time_average_matches_sampled_mean(dims in dims_strategy(), master in any::<u64>()) {
        let total: usize = dims.iter().sum();
        let seed = SeedSpec::new(master, 6);
        let decomp = uniform_decomposition(&dims, seed).unwrap();
        let spectrum = generate_nonresonant_spectrum(total, seed.stream(9), 25.0).unwrap();
        let state = uniform_state(total, seed.stream(2)).unwrap();
        let proj = ntlab_core::build_projector_overlaps(&decomp, 0).unwrap();

        let n = 4096usize;
        let t_max = occupation_horizon(&spectrum, 200).unwrap();
        let dt = t_max / n as f64;
        let mut acc = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..n {
            let occ =
                macro_occupation_at_time(&state, &spectrum, &proj, (k as f64 + 0.5) * dt).unwrap();
            acc += occ;
            lo = lo.min(occ);
            hi = hi.max(occ);
        }
        let sampled = acc / n as f64;
        let exact = time_averaged_occupation(&state, &proj).unwrap();
        let spread = hi - lo;
        let tol = 3.0 / (n as f64).sqrt() * spread + 1e-12;
        prop_assert!(
            (sampled - exact).abs() <= tol,
            "sampled {sampled} vs exact {exact}, tol {tol}"
        );
    }
}

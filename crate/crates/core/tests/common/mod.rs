//! Shared oracles and statistics helpers for the integration suites.
//!
//! Everything here is deliberately independent of the library's computation
//! paths: the grid maximizer re-evaluates the deviation functional from the
//! raw overlap matrix with plain loops, and the distribution tests are
//! textbook Kolmogorov-Smirnov.

#![allow(dead_code)]

use ntlab_core::ProjectorOverlaps;

/// Direct evaluation of the deviation functional from the overlap matrix:
/// `sum_{a != b} p_a p_b |P[a][b]|^2 + (sum_a p_a P[a][a] - d/D)^2`.
pub fn deviation_direct(proj: &ProjectorOverlaps, populations: &[f64]) -> f64 {
    let dim = proj.total_dim();
    let target = proj.dim() as f64 / dim as f64;
    let m = proj.matrix();
    let mut off = 0.0;
    let mut diag_dot = 0.0;
    for a in 0..dim {
        diag_dot += populations[a] * m[[a, a]].re;
        for b in 0..dim {
            if a != b {
                off += populations[a] * populations[b] * m[[a, b]].norm_sqr();
            }
        }
    }
    off + (diag_dot - target).powi(2)
}

/// Exhaustive simplex-grid maximizer with a pattern-search polish; the
/// reference for the worst-case search at small dimension.
///
/// Enumerates every population vector on the grid with the given step
/// (compositions of `1/step` into `dim` parts), keeps the best, then
/// refines it by repeated pairwise mass transfers with a shrinking step.
pub fn grid_worst_case(proj: &ProjectorOverlaps, step: f64) -> (f64, Vec<f64>) {
    let dim = proj.total_dim();
    let units = (1.0 / step).round() as usize;
    let mut best_val = f64::NEG_INFINITY;
    let mut best = vec![0.0; dim];

    let mut counts = vec![0usize; dim];
    enumerate_compositions(units, dim, 0, &mut counts, &mut |c| {
        let p: Vec<f64> = c.iter().map(|&k| k as f64 * step).collect();
        let v = deviation_direct(proj, &p);
        if v > best_val {
            best_val = v;
            best = p;
        }
    });

    // polish: pairwise transfers with shrinking step
    let mut delta = step;
    while delta > 1e-9 {
        let mut improved = true;
        while improved {
            improved = false;
            for i in 0..dim {
                if best[i] < delta {
                    continue;
                }
                for j in 0..dim {
                    if i == j {
                        continue;
                    }
                    let mut cand = best.clone();
                    cand[i] -= delta;
                    cand[j] += delta;
                    let v = deviation_direct(proj, &cand);
                    if v > best_val + 1e-15 {
                        best_val = v;
                        best = cand;
                        improved = true;
                    }
                }
            }
        }
        delta *= 0.5;
    }
    (best_val, best)
}

fn enumerate_compositions(
    remaining: usize,
    slots: usize,
    index: usize,
    counts: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if index == slots - 1 {
        counts[index] = remaining;
        visit(counts);
        return;
    }
    for k in 0..=remaining {
        counts[index] = k;
        enumerate_compositions(remaining - k, slots, index + 1, counts, visit);
    }
}

/// One-sample Kolmogorov-Smirnov statistic against the uniform law on [0,1].
pub fn ks_statistic_uniform(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = samples.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in samples.iter().enumerate() {
        let cdf = x.clamp(0.0, 1.0);
        let hi = (i as f64 + 1.0) / n - cdf;
        let lo = cdf - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).expect("finite samples"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("finite samples"));
    let (na, nb) = (a.len(), b.len());
    let mut i = 0;
    let mut j = 0;
    let mut d = 0.0_f64;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    d
}

/// KS critical value at the 1% level.
pub fn ks_critical_one_sample(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Two-sample KS critical value at the 1% level.
pub fn ks_critical_two_sample(n: usize, m: usize) -> f64 {
    1.628 * (((n + m) as f64) / ((n * m) as f64)).sqrt()
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (xi, yi) in x.iter().zip(y.iter()) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    num / den
}

/// Small splitmix64 generator for test-side instance construction, kept
/// separate from the library's sampling streams.
pub struct TestRng(pub u64);

impl TestRng {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform integer in `lo..hi`.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() % (hi - lo) as u64) as usize
    }
}

/// Sample mean and unbiased variance.
pub fn mean_and_variance(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Median of a sample (copied, sorted).
pub fn median(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    sorted[sorted.len() / 2]
}

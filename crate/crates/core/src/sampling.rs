//! Checks that a sampled subarea's RGB distribution matches the full image.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default pass threshold on the largest Q-Q deviation (channels in `[0, 1]`).
pub const DEFAULT_TAU_QQ: f64 = 0.05;
/// Default pass threshold on the fraction of parent pixels inside the sampled range.
pub const DEFAULT_TAU_RC: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingThresholds {
    pub tau_qq: f64,
    pub tau_rc: f64,
}

impl Default for SamplingThresholds {
    fn default() -> Self {
        Self {
            tau_qq: DEFAULT_TAU_QQ,
            tau_rc: DEFAULT_TAU_RC,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    /// `(sample_quantile, parent_quantile)` at increasing levels.
    pub qq_points: Vec<(f64, f64)>,
    pub max_qq_deviation: f64,
    pub ks_statistic: f64,
    pub range_coverage: f64,
    pub sample_min: f64,
    pub sample_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub levels: Vec<f64>,
    pub channels: Vec<ChannelReport>,
    /// Largest deviation over channels.
    pub max_qq_deviation: f64,
    /// Smallest coverage over channels.
    pub range_coverage: f64,
    pub thresholds: SamplingThresholds,
    pub pass: bool,
}

/// Type-7 quantile (linear interpolation between order statistics) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Two-sample Kolmogorov–Smirnov statistic of sorted data.
pub fn ks_statistic_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Compares the per-channel distribution of `sample` (m × 3) against `parent` (n × 3).
///
/// Quantile levels are `i / (levels + 1)` for `i = 1..=levels`.
pub fn qq_compare(
    sample: &[[f64; 3]],
    parent: &[[f64; 3]],
    levels: usize,
    thresholds: SamplingThresholds,
) -> Result<SamplingReport> {
    if sample.is_empty() || parent.is_empty() {
        return Err(Error::InsufficientSamples {
            needed: 1,
            got: 0,
        });
    }
    if sample.len() < 10 {
        return Err(Error::InsufficientSamples {
            needed: 10,
            got: sample.len(),
        });
    }
    if parent.len() < sample.len() {
        return Err(Error::InvalidArgument(format!(
            "parent ({}) smaller than sample ({})",
            parent.len(),
            sample.len()
        )));
    }
    if levels < 10 {
        return Err(Error::InvalidArgument(format!("need at least 10 levels, got {levels}")));
    }
    if let Some(index) = sample.iter().chain(parent).flatten().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let qs: Vec<f64> = (1..=levels).map(|i| i as f64 / (levels + 1) as f64).collect();
    let channels: Vec<ChannelReport> = (0..3)
        .map(|c| {
            let s = sorted(sample.iter().map(|p| p[c]).collect());
            let p = sorted(parent.iter().map(|p| p[c]).collect());
            let qq_points: Vec<(f64, f64)> = qs
                .iter()
                .map(|&q| (quantile_sorted(&s, q), quantile_sorted(&p, q)))
                .collect();
            let max_qq_deviation = qq_points
                .iter()
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let (lo, hi) = (s[0], s[s.len() - 1]);
            let inside = p.partition_point(|&v| v <= hi) - p.partition_point(|&v| v < lo);
            ChannelReport {
                qq_points,
                max_qq_deviation,
                ks_statistic: ks_statistic_sorted(&s, &p),
                range_coverage: inside as f64 / p.len() as f64,
                sample_min: lo,
                sample_max: hi,
            }
        })
        .collect();
    let max_qq_deviation = channels.iter().map(|c| c.max_qq_deviation).fold(0.0, f64::max);
    let range_coverage = channels
        .iter()
        .map(|c| c.range_coverage)
        .fold(f64::INFINITY, f64::min);
    let pass = max_qq_deviation <= thresholds.tau_qq && range_coverage >= thresholds.tau_rc;
    Ok(SamplingReport {
        levels: qs,
        channels,
        max_qq_deviation,
        range_coverage,
        thresholds,
        pass,
    })
}

/// Marks pixels whose channels fall outside the per-channel `[min, max]` box.
pub fn out_of_range_mask(pixels: &[[f64; 3]], lo: [f64; 3], hi: [f64; 3]) -> Vec<bool> {
    pixels
        .iter()
        .map(|p| (0..3).any(|c| p[c] < lo[c] || p[c] > hi[c]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize, hi: f64, seed: u64) -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| std::array::from_fn(|_| rng.random_range(0.0..hi)))
            .collect()
    }

    #[test]
    fn identical_sets_pass() {
        let x = uniform(500, 1.0, 1);
        let r = qq_compare(&x, &x, 99, SamplingThresholds::default()).unwrap();
        assert!(r.pass);
        assert_eq!(r.max_qq_deviation, 0.0);
        assert_eq!(r.range_coverage, 1.0);
        for ch in &r.channels {
            assert_eq!(ch.ks_statistic, 0.0);
            assert!(ch.qq_points.iter().all(|(a, b)| a == b));
            assert!(ch.qq_points.windows(2).all(|w| w[0].0 <= w[1].0));
        }
    }

    #[test]
    fn half_range_sample_fails_with_half_coverage() {
        let parent = uniform(100_000, 1.0, 2);
        let sample = uniform(1000, 0.5, 3);
        // brute-force coverage count
        let smax: [f64; 3] =
            std::array::from_fn(|c| sample.iter().map(|p| p[c]).fold(f64::MIN, f64::max));
        let smin: [f64; 3] =
            std::array::from_fn(|c| sample.iter().map(|p| p[c]).fold(f64::MAX, f64::min));
        let brute = (0..3)
            .map(|c| {
                parent
                    .iter()
                    .filter(|p| p[c] >= smin[c] && p[c] <= smax[c])
                    .count() as f64
                    / parent.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        let r = qq_compare(&sample, &parent, 99, SamplingThresholds::default()).unwrap();
        assert_eq!(r.range_coverage, brute);
        assert!((r.range_coverage - 0.5).abs() < 0.01);
        assert!(!r.pass);
    }

    /// Asymptotic Kolmogorov tail probability with the Stephens small-sample correction.
    fn ks_tail(d: f64, ne: f64) -> f64 {
        let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
        let mut sum = 0.0;
        for k in 1..100 {
            let k = k as f64;
            let sign = if k as i64 % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign * (-2.0 * k * k * lambda * lambda).exp();
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }

    #[test]
    fn random_subset_ks_matches_kolmogorov_distribution() {
        // Monte-Carlo over 750-point subsets of a 225000-point parent, per channel.
        let parent = uniform(225_000, 1.0, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 100;
        let mut below = 0usize;
        for _ in 0..trials {
            let idx = rand::seq::index::sample(&mut rng, parent.len(), 750);
            let sample: Vec<[f64; 3]> = idx.iter().map(|i| parent[i]).collect();
            let r = qq_compare(&sample, &parent, 99, SamplingThresholds::default()).unwrap();
            below += r.channels.iter().filter(|c| c.ks_statistic < 0.05).count();
        }
        let observed = below as f64 / (3 * trials) as f64;
        let ne = 750.0 * 225_000.0 / (750.0 + 225_000.0);
        let expected = 1.0 - ks_tail(0.05, ne);
        // about 0.95, not 0.99: D < 0.05 fails roughly one channel in twenty
        assert!((expected - 0.953).abs() < 0.01, "{expected}");
        assert!((observed - expected).abs() < 0.04, "{observed} vs {expected}");
    }

    #[test]
    fn monotone_transform_preserves_ranks() {
        let parent = uniform(5000, 1.0, 6);
        let sample: Vec<[f64; 3]> = parent.iter().step_by(7).copied().collect();
        let f = |p: &[f64; 3]| p.map(|v| (3.0 * v).exp() - 2.0);
        let r1 = qq_compare(&sample, &parent, 50, SamplingThresholds::default()).unwrap();
        let ts: Vec<_> = sample.iter().map(f).collect();
        let tp: Vec<_> = parent.iter().map(f).collect();
        let r2 = qq_compare(&ts, &tp, 50, SamplingThresholds::default()).unwrap();
        for (a, b) in r1.channels.iter().zip(&r2.channels) {
            assert_eq!(a.ks_statistic, b.ks_statistic);
            assert_eq!(a.range_coverage, b.range_coverage);
            assert!(b.qq_points.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
        }
    }

    #[test]
    fn quantile_type7_matches_hand_values() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert_eq!(quantile_sorted(&s, 0.5), 2.5);
        assert!((quantile_sorted(&s, 0.25) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn errors_on_bad_input() {
        let x = uniform(20, 1.0, 7);
        assert!(qq_compare(&[], &x, 20, SamplingThresholds::default()).is_err());
        assert!(qq_compare(&x[..5], &x, 20, SamplingThresholds::default()).is_err());
        assert!(qq_compare(&x, &x, 5, SamplingThresholds::default()).is_err());
        let mut bad = x.clone();
        bad[3][1] = f64::NAN;
        assert!(qq_compare(&bad, &x, 20, SamplingThresholds::default()).is_err());
    }
}

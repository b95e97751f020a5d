//! Percentile bootstrap confidence interval for the mean.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::StatsError;

/// Percentile bootstrap CI for the sample mean.
///
/// Draws `resamples` bootstrap samples (with replacement, sized like the
/// input), computes each mean, and returns the empirical `alpha/2` and
/// `1 - alpha/2` quantiles as order statistics of the resample
/// distribution. Deterministic for a fixed seed.
pub fn bootstrap_ci(
    samples: &[f64],
    resamples: usize,
    alpha: f64,
    seed: u64,
) -> Result<(f64, f64), StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptySamples);
    }
    if resamples == 0 {
        return Err(StatsError::ZeroResamples);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidAlpha);
    }
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += samples[rng.random_range(0..n)];
        }
        means.push(sum / n as f64);
    }
    means.sort_by(|a, b| a.partial_cmp(b).expect("means are finite"));
    let lo = quantile_nearest_rank(&means, alpha / 2.0);
    let hi = quantile_nearest_rank(&means, 1.0 - alpha / 2.0);
    Ok((lo, hi))
}

/// Nearest-rank quantile: the ceil(q * B)-th order statistic.
fn quantile_nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let b = sorted.len();
    let rank = (q * b as f64).ceil() as usize;
    sorted[rank.clamp(1, b) - 1]
}

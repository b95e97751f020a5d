//! Wilcoxon signed-rank test, Holm step-down adjustment, and Cliff's delta.

use statrs::distribution::{ContinuousCDF, Normal};

use super::ranks::ranks_from_scores;
use super::StatsError;

/// How the signed-rank p-value is computed.
///
/// `Auto` enumerates all sign assignments up to 10 effective pairs and
/// switches to the tie-corrected normal approximation above that.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    Auto,
    Exact,
    Approximate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// Sum of ranks of positive differences (W+).
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// True when the exact enumeration was used.
    pub exact: bool,
    /// True when every difference was zero; `p_value` is 1.0 by convention.
    pub all_zero: bool,
}

const EXACT_CUTOFF: usize = 10;

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped. When every difference is zero the test is
/// vacuous and returns `p = 1.0` with the `all_zero` note set.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult, StatsError> {
    wilcoxon_signed_rank_with(x, y, WilcoxonMethod::Auto)
}

pub fn wilcoxon_signed_rank_with(
    x: &[f64],
    y: &[f64],
    method: WilcoxonMethod,
) -> Result<WilcoxonResult, StatsError> {
    if x.len() != y.len() || x.is_empty() {
        return Err(StatsError::LengthMismatch {
            a: x.len(),
            b: y.len(),
        });
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            p_value: 1.0,
            exact: true,
            all_zero: true,
        });
    }
    let n = diffs.len();
    // rank |d| ascending: reuse the descending midranker on negated values
    let neg_abs: Vec<f64> = diffs.iter().map(|d| -d.abs()).collect();
    let ranks = ranks_from_scores(&neg_abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let mu = n as f64 * (n as f64 + 1.0) / 4.0;

    let use_exact = match method {
        WilcoxonMethod::Exact => true,
        WilcoxonMethod::Approximate => false,
        WilcoxonMethod::Auto => n <= EXACT_CUTOFF,
    };
    let p_value = if use_exact {
        exact_p(&ranks, w_plus, mu)
    } else {
        approximate_p(&ranks, w_plus, mu, n)
    };
    Ok(WilcoxonResult {
        statistic: w_plus,
        p_value,
        exact: use_exact,
        all_zero: false,
    })
}

/// Enumerate all 2^n sign assignments; the null distribution of W+ is
/// symmetric about `mu`, so the two-sided p-value is the probability of a
/// deviation at least as large as the observed one.
fn exact_p(ranks: &[f64], w_plus: f64, mu: f64) -> f64 {
    let n = ranks.len();
    let observed = (w_plus - mu).abs();
    let total = 1u64 << n;
    let mut count = 0u64;
    for mask in 0..total {
        let mut w = 0.0;
        for (bit, rank) in ranks.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                w += rank;
            }
        }
        if (w - mu).abs() >= observed - 1e-9 {
            count += 1;
        }
    }
    count as f64 / total as f64
}

/// Tie-corrected normal approximation.
fn approximate_p(ranks: &[f64], w_plus: f64, mu: f64, n: usize) -> f64 {
    let n_f = n as f64;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite ranks"));
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t.powi(3) - t;
        i = j + 1;
    }
    let variance = n_f * (n_f + 1.0) * (2.0 * n_f + 1.0) / 24.0 - tie_term / 48.0;
    if variance <= 0.0 {
        return 1.0;
    }
    let z = (w_plus - mu) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * (1.0 - normal.cdf(z.abs()))).clamp(0.0, 1.0)
}

/// Holm step-down adjustment.
///
/// Sort ascending, multiply the i-th smallest p by `(m - i)`, enforce
/// monotonicity along the sorted order, cap at 1, and restore input order.
pub fn holm_adjust(p_values: &[f64]) -> Result<Vec<f64>, StatsError> {
    for &p in p_values {
        if !(0.0..=1.0).contains(&p) {
            return Err(StatsError::PValueOutOfRange(p));
        }
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].partial_cmp(&p_values[b]).expect("finite p"));
    let mut adjusted = vec![0.0; m];
    let mut running_max = 0.0f64;
    for (i, &idx) in order.iter().enumerate() {
        let scaled = ((m - i) as f64 * p_values[idx]).min(1.0);
        running_max = running_max.max(scaled);
        adjusted[idx] = running_max;
    }
    Ok(adjusted)
}

/// Cliff's delta: `(#{a_i > b_j} - #{a_i < b_j}) / (|a| * |b|)`.
pub fn cliffs_delta(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySamples);
    }
    let mut greater = 0i64;
    let mut less = 0i64;
    for &x in a {
        for &y in b {
            if x > y {
                greater += 1;
            } else if x < y {
                less += 1;
            }
        }
    }
    Ok((greater - less) as f64 / (a.len() * b.len()) as f64)
}

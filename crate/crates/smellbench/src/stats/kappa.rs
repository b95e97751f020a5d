//! Cohen's kappa (unweighted and quadratic-weighted) and Fleiss' kappa.

use super::{OrdinalScale, StatsError};

/// Disagreement weighting for Cohen's kappa.
///
/// With `k` ordinal categories, quadratic weights are
/// `w[i][j] = ((i - j) / (k - 1))^2`, so for `k = 3` an adjacent
/// disagreement costs 0.25 and an extreme disagreement costs 1.00.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    None,
    Quadratic,
}

impl Weighting {
    pub fn weight(self, i: usize, j: usize, categories: usize) -> f64 {
        match self {
            Weighting::None => {
                if i == j {
                    0.0
                } else {
                    1.0
                }
            }
            Weighting::Quadratic => {
                let d = i as f64 - j as f64;
                let span = (categories - 1) as f64;
                (d / span).powi(2)
            }
        }
    }
}

/// A kappa statistic; `degenerate` flags the no-expected-disagreement case
/// where the value 1.0 is assigned by convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaResult {
    pub value: f64,
    pub degenerate: bool,
}

/// Cohen's kappa between two raters over a shared ordinal scale.
///
/// `kappa = 1 - sum(w * observed) / sum(w * expected)` with the expected
/// matrix taken from the raters' marginals. When both raters are constant
/// and equal there is no expected disagreement; the result is defined as
/// 1.0 and flagged degenerate.
pub fn cohen_kappa(
    a: &[usize],
    b: &[usize],
    weighting: Weighting,
    scale: &OrdinalScale,
) -> Result<KappaResult, StatsError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(StatsError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let k = scale.len();
    for &r in a.iter().chain(b) {
        if r >= k {
            return Err(StatsError::RatingOutOfRange {
                value: r,
                categories: k,
            });
        }
    }
    let n = a.len() as f64;
    let mut observed = vec![vec![0.0f64; k]; k];
    for (&x, &y) in a.iter().zip(b) {
        observed[x][y] += 1.0 / n;
    }
    let row_marginals: Vec<f64> = (0..k).map(|i| observed[i].iter().sum()).collect();
    let col_marginals: Vec<f64> = (0..k)
        .map(|j| (0..k).map(|i| observed[i][j]).sum())
        .collect();

    let mut weighted_observed = 0.0;
    let mut weighted_expected = 0.0;
    for i in 0..k {
        for j in 0..k {
            let w = weighting.weight(i, j, k);
            weighted_observed += w * observed[i][j];
            weighted_expected += w * row_marginals[i] * col_marginals[j];
        }
    }
    if weighted_expected == 0.0 {
        return Ok(KappaResult {
            value: 1.0,
            degenerate: true,
        });
    }
    Ok(KappaResult {
        value: 1.0 - weighted_observed / weighted_expected,
        degenerate: false,
    })
}

/// Fleiss' kappa over an item x category count matrix with an equal number
/// of raters per item.
pub fn fleiss_kappa(counts: &[Vec<usize>]) -> Result<KappaResult, StatsError> {
    if counts.is_empty() {
        return Err(StatsError::EmptySamples);
    }
    let raters: usize = counts[0].iter().sum();
    if raters < 2 {
        return Err(StatsError::UnevenRaters);
    }
    let categories = counts[0].len();
    for row in counts {
        if row.len() != categories || row.iter().sum::<usize>() != raters {
            return Err(StatsError::UnevenRaters);
        }
    }
    let n_items = counts.len() as f64;
    let n_raters = raters as f64;

    // per-item agreement
    let p_bar: f64 = counts
        .iter()
        .map(|row| {
            let sum_sq: f64 = row.iter().map(|&c| (c * c) as f64).sum();
            (sum_sq - n_raters) / (n_raters * (n_raters - 1.0))
        })
        .sum::<f64>()
        / n_items;

    // chance agreement from category proportions
    let p_e: f64 = (0..categories)
        .map(|j| {
            let total: f64 = counts.iter().map(|row| row[j] as f64).sum();
            (total / (n_items * n_raters)).powi(2)
        })
        .sum();

    if (1.0 - p_e).abs() < 1e-15 {
        // all mass in one category: no disagreement is possible
        return Ok(KappaResult {
            value: 1.0,
            degenerate: true,
        });
    }
    Ok(KappaResult {
        value: (p_bar - p_e) / (1.0 - p_e),
        degenerate: false,
    })
}

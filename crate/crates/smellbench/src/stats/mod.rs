//! Statistical toolkit backing the evaluation methodology: bootstrap
//! confidence intervals, Cohen's and Fleiss' kappa, Kendall's W, the
//! Wilcoxon signed-rank test with Holm correction, and Cliff's delta.
//!
//! Everything here is a pure function over plain slices; determinism under
//! a fixed seed is part of the contract wherever randomness is involved.

mod bootstrap;
mod kappa;
mod nonparam;
mod ranks;

pub use bootstrap::bootstrap_ci;
pub use kappa::{cohen_kappa, fleiss_kappa, KappaResult, Weighting};
pub use nonparam::{
    cliffs_delta, holm_adjust, wilcoxon_signed_rank, wilcoxon_signed_rank_with, WilcoxonMethod,
    WilcoxonResult,
};
pub use ranks::{kendall_chi_square, kendall_w, ranks_from_scores, KendallW, RankTable};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("samples must be non-empty")]
    EmptySamples,
    #[error("bootstrap resample count must be at least 1")]
    ZeroResamples,
    #[error("alpha must lie in (0, 1)")]
    InvalidAlpha,
    #[error("rating slices must have equal, non-zero length (got {a} and {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("rating {value} is outside the {categories}-category scale")]
    RatingOutOfRange { value: usize, categories: usize },
    #[error("ordinal scale needs at least 2 categories")]
    DegenerateScale,
    #[error("each item needs the same number of raters (>= 2)")]
    UnevenRaters,
    #[error("rank table needs m >= 2 rankings over n >= 2 subjects")]
    DegenerateRankTable,
    #[error("rank table row {row} is not a mid-rank permutation of 1..={n}")]
    MalformedRankRow { row: usize, n: usize },
    #[error("wilcoxon requires at least one nonzero difference")]
    AllZeroDifferences,
    #[error("p-value {0} is outside [0, 1]")]
    PValueOutOfRange(f64),
}

/// An ordered category scale for ordinal agreement statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrdinalScale {
    categories: Vec<String>,
}

impl OrdinalScale {
    pub fn new(categories: Vec<String>) -> Result<Self, StatsError> {
        if categories.len() < 2 {
            return Err(StatsError::DegenerateScale);
        }
        Ok(Self { categories })
    }

    /// The three-verdict scale used throughout the benchmark:
    /// false positive < partially valid < true positive.
    pub fn verdicts() -> Self {
        Self {
            categories: vec![
                "false_positive".into(),
                "partially_valid".into(),
                "true_positive".into(),
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }
}

/// Items x raters matrix of category indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingMatrix {
    rows: Vec<Vec<usize>>,
    categories: usize,
}

impl RatingMatrix {
    /// Build from item rows; every row must have the same number of raters
    /// and every cell must be a valid category index.
    pub fn new(rows: Vec<Vec<usize>>, categories: usize) -> Result<Self, StatsError> {
        let raters = rows.first().map(Vec::len).unwrap_or(0);
        if raters < 2 {
            return Err(StatsError::UnevenRaters);
        }
        for row in &rows {
            if row.len() != raters {
                return Err(StatsError::UnevenRaters);
            }
            for &cell in row {
                if cell >= categories {
                    return Err(StatsError::RatingOutOfRange {
                        value: cell,
                        categories,
                    });
                }
            }
        }
        Ok(Self { rows, categories })
    }

    pub fn raters(&self) -> usize {
        self.rows.first().map(Vec::len).unwrap_or(0)
    }

    pub fn items(&self) -> usize {
        self.rows.len()
    }

    /// Collapse to an item x category count matrix (the Fleiss input form).
    pub fn category_counts(&self) -> Vec<Vec<usize>> {
        self.rows
            .iter()
            .map(|row| {
                let mut counts = vec![0usize; self.categories];
                for &cell in row {
                    counts[cell] += 1;
                }
                counts
            })
            .collect()
    }

    /// Extract one rater's column.
    pub fn rater(&self, index: usize) -> Vec<usize> {
        self.rows.iter().map(|row| row[index]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rating_matrix_enforces_shape() {
        assert!(RatingMatrix::new(vec![vec![0, 1], vec![1]], 3).is_err());
        assert!(RatingMatrix::new(vec![vec![0, 3]], 3).is_err());
        assert!(RatingMatrix::new(vec![vec![0]], 3).is_err());
        let m = RatingMatrix::new(vec![vec![0, 1], vec![2, 2]], 3).unwrap();
        assert_eq!(m.raters(), 2);
        assert_eq!(m.items(), 2);
        assert_eq!(m.category_counts(), vec![vec![1, 1, 0], vec![0, 0, 2]]);
        assert_eq!(m.rater(1), vec![1, 2]);
    }

    #[test]
    fn scale_requires_two_categories() {
        assert!(OrdinalScale::new(vec!["only".into()]).is_err());
        assert_eq!(OrdinalScale::verdicts().len(), 3);
    }
}

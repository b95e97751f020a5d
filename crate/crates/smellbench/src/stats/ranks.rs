//! Mid-rank utilities and Kendall's coefficient of concordance.

use super::StatsError;

/// `m` rankings of the same `n` subjects, ties as mid-ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    rows: Vec<Vec<f64>>,
}

impl RankTable {
    /// Build from rank rows. Every row must be a mid-rank assignment of
    /// `1..=n`: its values sum to `n(n+1)/2` and lie within `[1, n]`.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, StatsError> {
        let m = rows.len();
        let n = rows.first().map(Vec::len).unwrap_or(0);
        if m < 2 || n < 2 {
            return Err(StatsError::DegenerateRankTable);
        }
        for (idx, row) in rows.iter().enumerate() {
            let expected_sum = (n * (n + 1)) as f64 / 2.0;
            let sum: f64 = row.iter().sum();
            let in_range = row.iter().all(|&r| (1.0..=n as f64).contains(&r));
            if row.len() != n || !in_range || (sum - expected_sum).abs() > 1e-9 {
                return Err(StatsError::MalformedRankRow { row: idx, n });
            }
        }
        Ok(Self { rows })
    }

    /// Rank each row of scores (rank 1 = highest score) and assemble the
    /// table.
    pub fn from_score_rows(score_rows: &[Vec<f64>]) -> Result<Self, StatsError> {
        let rows = score_rows.iter().map(|row| ranks_from_scores(row)).collect();
        Self::new(rows)
    }

    pub fn rankings(&self) -> usize {
        self.rows.len()
    }

    pub fn subjects(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Mid-ranks with rank 1 assigned to the highest score; ties share the
/// average of the ranks they span.
pub fn ranks_from_scores(scores: &[f64]) -> Vec<f64> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mid;
        }
        i = j + 1;
    }
    ranks
}

/// Kendall's W with its chi-square statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KendallW {
    pub w: f64,
    pub chi2: f64,
    pub df: usize,
}

/// Kendall's coefficient of concordance with tie correction, plus
/// `chi2 = m(n-1)W` on `n-1` degrees of freedom.
pub fn kendall_w(table: &RankTable) -> KendallW {
    let m = table.rankings() as f64;
    let n = table.subjects();
    let n_f = n as f64;

    let column_sums: Vec<f64> = (0..n)
        .map(|j| table.rows().iter().map(|row| row[j]).sum())
        .collect();
    let mean_sum = m * (n_f + 1.0) / 2.0;
    let s: f64 = column_sums.iter().map(|r| (r - mean_sum).powi(2)).sum();

    // tie correction: sum of (t^3 - t) over tie groups in each row
    let tie_term: f64 = table
        .rows()
        .iter()
        .map(|row| {
            let mut sorted = row.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite ranks"));
            let mut total = 0.0;
            let mut i = 0;
            while i < sorted.len() {
                let mut j = i;
                while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
                    j += 1;
                }
                let t = (j - i + 1) as f64;
                total += t.powi(3) - t;
                i = j + 1;
            }
            total
        })
        .sum();

    let denominator = m * m * (n_f.powi(3) - n_f) - m * tie_term;
    let w = if denominator <= 0.0 {
        // every row is fully tied; no concordance is measurable
        0.0
    } else {
        12.0 * s / denominator
    };
    let (chi2, df) = kendall_chi_square(w, table.rankings(), n);
    KendallW { w, chi2, df }
}

/// The chi-square statistic implied by a concordance value:
/// `chi2 = m(n-1)W`, `df = n-1`.
pub fn kendall_chi_square(w: f64, m: usize, n: usize) -> (f64, usize) {
    (m as f64 * (n as f64 - 1.0) * w, n - 1)
}

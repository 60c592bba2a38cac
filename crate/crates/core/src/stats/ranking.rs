use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use super::rank_tests::average_ranks;
use super::StatsError;
use crate::scoring::ScoreTable;

/// Mean values closer than this are displayed as tied.
const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMethod {
    /// Mean per-benchmark rank; lower is better.
    AverageRank,
    /// Mean per-benchmark score as a percentage of the best score; higher is better.
    RelativeToBest,
}

impl RankingMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            RankingMethod::AverageRank => "average_rank",
            RankingMethod::RelativeToBest => "relative_to_best",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, RankingMethod::RelativeToBest)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub fuzzer: String,
    pub value: f64,
    /// 1-based position; tied values share the average position.
    pub rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub method: RankingMethod,
    pub entries: Vec<RankingEntry>,
    /// Benchmarks whose best score was 0 (relative-to-best only).
    #[serde(default)]
    pub degenerate_benchmarks: Vec<String>,
}

/// Ranks scores so the highest gets rank 1; ties share the average rank.
pub fn rank_descending(scores: &[f64]) -> Vec<f64> {
    let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
    average_ranks(&negated)
}

/// Per-benchmark ranks, `benchmarks × fuzzers`.
pub fn rank_matrix(table: &ScoreTable) -> Vec<Vec<f64>> {
    table.scores.iter().map(|row| rank_descending(row)).collect()
}

fn finalize(method: RankingMethod, mut values: Vec<(String, f64)>, degenerate: Vec<String>) -> Ranking {
    values.sort_by(|a, b| {
        let by_value = if method.higher_is_better() {
            b.1.total_cmp(&a.1)
        } else {
            a.1.total_cmp(&b.1)
        };
        by_value.then_with(|| a.0.cmp(&b.0))
    });
    let mut entries: Vec<RankingEntry> = Vec::with_capacity(values.len());
    let mut i = 0;
    while i < values.len() {
        let mut j = i + 1;
        while j < values.len() && (values[j].1 - values[i].1).abs() <= TIE_EPS {
            j += 1;
        }
        let rank = (i + 1 + j) as f64 / 2.0;
        for (fuzzer, value) in &values[i..j] {
            entries.push(RankingEntry {
                fuzzer: fuzzer.clone(),
                value: *value,
                rank,
            });
        }
        i = j;
    }
    Ranking {
        method,
        entries,
        degenerate_benchmarks: degenerate,
    }
}

fn check_table(table: &ScoreTable) -> Result<(), StatsError> {
    if table.is_empty() {
        Err(StatsError::Empty("score table"))
    } else {
        Ok(())
    }
}

/// Column means of a `benchmarks × fuzzers` rank matrix.
fn mean_ranks(ranks: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = ranks.len() as f64;
    (0..k)
        .map(|f| ranks.iter().map(|row| row[f]).sum::<f64>() / n)
        .collect()
}

pub fn average_rank_ranking(table: &ScoreTable) -> Result<Ranking, StatsError> {
    check_table(table)?;
    let means = mean_ranks(&rank_matrix(table), table.fuzzers.len());
    Ok(finalize(
        RankingMethod::AverageRank,
        table.fuzzers.iter().cloned().zip(means).collect(),
        Vec::new(),
    ))
}

pub fn relative_to_best_ranking(table: &ScoreTable) -> Result<Ranking, StatsError> {
    check_table(table)?;
    let k = table.fuzzers.len();
    let mut sums = vec![0.0; k];
    let mut degenerate = Vec::new();
    for (bench, row) in table.benchmarks.iter().zip(&table.scores) {
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if best <= 0.0 {
            degenerate.push(bench.clone());
            sums.iter_mut().for_each(|s| *s += 100.0);
            continue;
        }
        for (s, score) in sums.iter_mut().zip(row) {
            *s += score / best * 100.0;
        }
    }
    let n = table.benchmarks.len() as f64;
    Ok(finalize(
        RankingMethod::RelativeToBest,
        table
            .fuzzers
            .iter()
            .cloned()
            .zip(sums.into_iter().map(|s| s / n))
            .collect(),
        degenerate,
    ))
}

/// Friedman χ² over a `benchmarks × fuzzers` rank matrix, with its p-value
/// from the χ² survival function at k − 1 degrees of freedom.
pub fn friedman_test(ranks: &[Vec<f64>]) -> Result<(f64, f64), StatsError> {
    if ranks.is_empty() {
        return Err(StatsError::Empty("rank matrix"));
    }
    let k = ranks[0].len();
    if k < 2 {
        return Err(StatsError::TooFewFuzzers(k));
    }
    if let Some(bad) = ranks.iter().find(|r| r.len() != k) {
        return Err(StatsError::LengthMismatch(bad.len(), k));
    }
    let n = ranks.len() as f64;
    let kf = k as f64;
    let means = mean_ranks(ranks, k);
    let sum_sq: f64 = means.iter().map(|r| r * r).sum();
    let mut stat = 12.0 * n / (kf * (kf + 1.0)) * sum_sq - 3.0 * n * (kf + 1.0);
    let grand = (kf + 1.0) / 2.0;
    if means.iter().all(|r| (r - grand).abs() <= TIE_EPS) || stat < 0.0 {
        stat = 0.0;
    }
    let p = if stat == 0.0 {
        1.0
    } else {
        gamma_ur((kf - 1.0) / 2.0, stat / 2.0)
    };
    Ok((stat, p))
}

// Two-tailed Nemenyi critical values q_α = studentized range quantile / √2
// at infinite degrees of freedom. k ≤ 10 from Demšar, "Statistical
// Comparisons of Classifiers over Multiple Data Sets", JMLR 7 (2006),
// Table 5; k = 11..=20 from the same studentized-range quantiles
// (scipy.stats.studentized_range), rounded to three decimals.
const Q_05: [f64; 19] = [
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219, 3.268, 3.313, 3.354, 3.391, 3.426, 3.458,
    3.489, 3.517, 3.544,
];
const Q_10: [f64; 19] = [
    1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978, 3.030, 3.077, 3.120, 3.159, 3.196, 3.230,
    3.261, 3.291, 3.319,
];

pub fn nemenyi_q(k: usize, alpha: f64) -> Result<f64, StatsError> {
    let table = if (alpha - 0.05).abs() < 1e-12 {
        &Q_05
    } else if (alpha - 0.10).abs() < 1e-12 {
        &Q_10
    } else {
        return Err(StatsError::UnsupportedAlpha(alpha));
    };
    if !(2..=20).contains(&k) {
        return Err(StatsError::UnsupportedK(k));
    }
    Ok(table[k - 2])
}

/// Nemenyi critical difference `q_α(k) · sqrt(k(k+1) / 6N)`.
pub fn nemenyi_cd(k: usize, n_benchmarks: usize, alpha: f64) -> Result<f64, StatsError> {
    let q = nemenyi_q(k, alpha)?;
    if n_benchmarks == 0 {
        return Err(StatsError::Empty("benchmark set"));
    }
    let kf = k as f64;
    Ok(q * (kf * (kf + 1.0) / (6.0 * n_benchmarks as f64)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRank {
    pub fuzzer: String,
    pub mean_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalDifference {
    pub alpha: f64,
    pub k: usize,
    pub n_benchmarks: usize,
    pub friedman_statistic: f64,
    pub friedman_p: f64,
    pub cd_value: f64,
    /// Sorted ascending by mean rank (best first).
    pub average_ranks: Vec<MeanRank>,
}

pub fn critical_difference(table: &ScoreTable, alpha: f64) -> Result<CriticalDifference, StatsError> {
    check_table(table)?;
    let k = table.fuzzers.len();
    let ranks = rank_matrix(table);
    let (friedman_statistic, friedman_p) = friedman_test(&ranks)?;
    let cd_value = nemenyi_cd(k, table.benchmarks.len(), alpha)?;
    let mut average_ranks: Vec<MeanRank> = table
        .fuzzers
        .iter()
        .zip(mean_ranks(&ranks, k))
        .map(|(f, r)| MeanRank {
            fuzzer: f.clone(),
            mean_rank: r,
        })
        .collect();
    average_ranks.sort_by(|a, b| {
        a.mean_rank
            .total_cmp(&b.mean_rank)
            .then_with(|| a.fuzzer.cmp(&b.fuzzer))
    });
    Ok(CriticalDifference {
        alpha,
        k,
        n_benchmarks: table.benchmarks.len(),
        friedman_statistic,
        friedman_p,
        cd_value,
        average_ranks,
    })
}

/// Maximal runs `(first, last)` of ascending-sorted mean ranks whose spread is below `cd`.
/// Runs of length one are omitted.
pub fn cd_groups(sorted_ranks: &[f64], cd: f64) -> Vec<(usize, usize)> {
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for i in 0..sorted_ranks.len() {
        let mut j = i;
        while j + 1 < sorted_ranks.len() && sorted_ranks[j + 1] - sorted_ranks[i] < cd {
            j += 1;
        }
        if j > i && groups.last().is_none_or(|&(_, last)| j > last) {
            groups.push((i, j));
        }
    }
    groups
}

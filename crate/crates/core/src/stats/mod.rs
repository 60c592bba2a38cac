//! Nonparametric statistics used by the analysis: medians and quartiles,
//! Vargha-Delaney Â₁₂ and the Mann-Whitney U test, both aggregate rankings,
//! Friedman + Nemenyi critical differences, cosine similarity of score
//! profiles, and per-benchmark discrimination statistics.

mod rank_tests;
mod ranking;

pub use rank_tests::{mann_whitney_u, vargha_delaney_a12, MannWhitney, EXACT_MAX_COMBINED};
pub use ranking::{
    average_rank_ranking, cd_groups, critical_difference, friedman_test, nemenyi_cd, nemenyi_q, rank_descending,
    rank_matrix, relative_to_best_ranking, CriticalDifference, MeanRank, Ranking, RankingEntry, RankingMethod,
};

use serde::{Deserialize, Serialize};

use crate::scoring::ScoreTable;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 fuzzers, got {0}")]
    TooFewFuzzers(usize),
    #[error("no Nemenyi constant for k={0} (supported: 2..=20)")]
    UnsupportedK(usize),
    #[error("unsupported alpha {0} (supported: 0.05, 0.10)")]
    UnsupportedAlpha(f64),
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Order-statistic median; even lengths average the two middle values.
pub fn median(values: &[f64]) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty("median input"));
    }
    let v = sorted(values);
    let mid = v.len() / 2;
    Ok(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

/// Linear-interpolation quantile on sorted data (Hyndman-Fan type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn population_std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// `dot(u, v) / (‖u‖·‖v‖)`; `None` when either vector is all zeros.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<Option<f64>, StatsError> {
    if u.len() != v.len() {
        return Err(StatsError::LengthMismatch(u.len(), v.len()));
    }
    if u.is_empty() {
        return Err(StatsError::Empty("similarity vector"));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(None);
    }
    Ok(Some((dot / (nu * nv)).clamp(-1.0, 1.0)))
}

/// Symmetric fuzzer × fuzzer cosine matrix; entries are `None` for all-zero profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub fuzzers: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

pub fn similarity_from_profiles(fuzzers: &[String], profiles: &[Vec<f64>]) -> Result<SimilarityMatrix, StatsError> {
    let k = fuzzers.len();
    let mut values = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let s = if i == j {
                cosine_similarity(&profiles[i], &profiles[i])?.map(|_| 1.0)
            } else {
                cosine_similarity(&profiles[i], &profiles[j])?
            };
            values[i][j] = s;
            values[j][i] = s;
        }
    }
    Ok(SimilarityMatrix {
        fuzzers: fuzzers.to_vec(),
        values,
    })
}

/// Cosine similarity between every pair of per-benchmark score profiles.
pub fn similarity_matrix(table: &ScoreTable) -> Result<SimilarityMatrix, StatsError> {
    if table.is_empty() {
        return Err(StatsError::Empty("score table"));
    }
    let profiles: Vec<Vec<f64>> = (0..table.fuzzers.len()).map(|f| table.profile(f)).collect();
    similarity_from_profiles(&table.fuzzers, &profiles)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrimination {
    pub benchmark: String,
    pub std_dev: f64,
    pub iqr: f64,
    pub min: f64,
    pub max: f64,
}

/// Spread of fuzzer scores on each benchmark: population σ, type-7 IQR, range.
pub fn benchmark_discrimination(table: &ScoreTable) -> Vec<Discrimination> {
    table
        .benchmarks
        .iter()
        .zip(&table.scores)
        .map(|(bench, row)| {
            let v = sorted(row);
            let (std_dev, iqr) = if v.len() < 2 {
                (0.0, 0.0)
            } else {
                (
                    population_std_dev(&v),
                    quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25),
                )
            };
            Discrimination {
                benchmark: bench.clone(),
                std_dev,
                iqr,
                min: v.first().copied().unwrap_or(0.0),
                max: v.last().copied().unwrap_or(0.0),
            }
        })
        .collect()
}

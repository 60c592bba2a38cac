//! Relative median scores for coverage and bug benchmarks, their per-fuzzer
//! aggregates, and the time-to-bug auxiliary metric.
//!
//! Trials missing from the archive (the fuzzer died before its first
//! snapshot, or the run failed) count as zero coverage and no bug. Medians
//! are always taken over the configured trial count.

use serde::{Deserialize, Serialize};

use crate::model::{BenchmarkKind, ExperimentConfig, TrialArchive, TrialRecord};
use crate::stats::{self, StatsError};

/// Scores for one metric family: `scores[b][f]` belongs to `benchmarks[b]` and `fuzzers[f]`.
///
/// Coverage scores are relative medians in [0, 100]; bug scores are raw
/// per-benchmark medians of the found/not-found indicator in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub metric: BenchmarkKind,
    pub fuzzers: Vec<String>,
    pub benchmarks: Vec<String>,
    pub scores: Vec<Vec<f64>>,
    /// Benchmarks where no trial of any fuzzer covered a line.
    #[serde(default)]
    pub degenerate: Vec<String>,
}

impl ScoreTable {
    pub fn get(&self, benchmark: &str, fuzzer: &str) -> Option<f64> {
        let b = self.benchmarks.iter().position(|x| x == benchmark)?;
        let f = self.fuzzers.iter().position(|x| x == fuzzer)?;
        Some(self.scores[b][f])
    }

    pub fn is_empty(&self) -> bool {
        self.benchmarks.is_empty() || self.fuzzers.is_empty()
    }

    /// Per-fuzzer score vector across benchmarks.
    pub fn profile(&self, fuzzer_index: usize) -> Vec<f64> {
        self.scores.iter().map(|row| row[fuzzer_index]).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.benchmarks.iter().enumerate().flat_map(move |(b, bench)| {
            self.fuzzers
                .iter()
                .enumerate()
                .map(move |(f, fuzzer)| (bench.as_str(), fuzzer.as_str(), self.scores[b][f]))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzerAggregate {
    pub fuzzer: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeToBugEntry {
    pub benchmark: String,
    pub fuzzer: String,
    pub mean_s: f64,
    pub crashing_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzerTimeToBug {
    pub fuzzer: String,
    pub mean_s: Option<f64>,
    pub crashing_trials: usize,
}

/// Mean first-crash times; entries exist only where at least one trial crashed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TimeToBugTable {
    pub entries: Vec<TimeToBugEntry>,
    pub overall: Vec<FuzzerTimeToBug>,
}

impl TimeToBugTable {
    pub fn overall_for(&self, fuzzer: &str) -> Option<f64> {
        self.overall.iter().find(|o| o.fuzzer == fuzzer).and_then(|o| o.mean_s)
    }
}

pub fn final_coverage(trial: &TrialRecord) -> u64 {
    trial.samples.last().map_or(0, |s| s.lines_covered)
}

fn padded(values: impl Iterator<Item = f64>, expected_count: usize) -> Result<Vec<f64>, StatsError> {
    if expected_count == 0 {
        return Err(StatsError::Empty("expected trial count"));
    }
    let mut v: Vec<f64> = values.collect();
    if v.len() < expected_count {
        v.resize(expected_count, 0.0);
    }
    Ok(v)
}

/// Median final coverage over `expected_count` trials, absent trials counting as 0.
pub fn median_coverage(trials: &[&TrialRecord], expected_count: usize) -> Result<f64, StatsError> {
    let finals = padded(trials.iter().map(|t| final_coverage(t) as f64), expected_count)?;
    stats::median(&finals)
}

/// Highest final coverage of any trial of any fuzzer on a benchmark.
pub fn benchmark_max_coverage(archive: &TrialArchive, benchmark: &str) -> u64 {
    archive.trials_on(benchmark).map(final_coverage).max().unwrap_or(0)
}

/// `100 · median / global max`, or 0 when nobody covered anything.
pub fn relative_coverage_score(
    fuzzer: &str,
    benchmark: &str,
    archive: &TrialArchive,
    expected_count: usize,
) -> Result<f64, StatsError> {
    let max = benchmark_max_coverage(archive, benchmark);
    let trials: Vec<&TrialRecord> = archive.trials_for(fuzzer, benchmark).collect();
    let median = median_coverage(&trials, expected_count)?;
    if max == 0 {
        return Ok(0.0);
    }
    // Multiply first: both operands are exact, so the quotient is invariant
    // under scaling all coverage values by a common factor.
    Ok((100.0 * median) / max as f64)
}

pub fn bug_indicator(trial: &TrialRecord) -> u8 {
    u8::from(trial.first_crash_t_s.is_some())
}

/// Median over `expected_count` trials of the found/not-found indicator.
pub fn bug_score(
    fuzzer: &str,
    benchmark: &str,
    archive: &TrialArchive,
    expected_count: usize,
) -> Result<f64, StatsError> {
    let hits = padded(
        archive
            .trials_for(fuzzer, benchmark)
            .map(|t| f64::from(bug_indicator(t))),
        expected_count,
    )?;
    stats::median(&hits)
}

/// Builds the score table for `kind` over the given benchmarks (in order).
pub fn score_table(
    config: &ExperimentConfig,
    archive: &TrialArchive,
    kind: BenchmarkKind,
    benchmarks: &[String],
) -> Result<ScoreTable, StatsError> {
    let expected = config.trials as usize;
    let fuzzers = config.fuzzer_ids();
    let mut scores = Vec::with_capacity(benchmarks.len());
    let mut degenerate = Vec::new();
    for bench in benchmarks {
        if kind == BenchmarkKind::Coverage && benchmark_max_coverage(archive, bench) == 0 {
            degenerate.push(bench.clone());
        }
        let row = fuzzers
            .iter()
            .map(|f| match kind {
                BenchmarkKind::Coverage => relative_coverage_score(f, bench, archive, expected),
                BenchmarkKind::Bug => bug_score(f, bench, archive, expected),
            })
            .collect::<Result<Vec<_>, _>>()?;
        scores.push(row);
    }
    Ok(ScoreTable {
        metric: kind,
        fuzzers,
        benchmarks: benchmarks.to_vec(),
        scores,
        degenerate,
    })
}

/// Coverage: mean of relative scores. Bug: `100 · Σ medians / #benchmarks`.
pub fn aggregate_scores(table: &ScoreTable) -> Result<Vec<FuzzerAggregate>, StatsError> {
    if table.is_empty() {
        return Err(StatsError::Empty("score table"));
    }
    let n = table.benchmarks.len() as f64;
    Ok(table
        .fuzzers
        .iter()
        .enumerate()
        .map(|(f, fuzzer)| {
            let sum: f64 = table.scores.iter().map(|row| row[f]).sum();
            let score = match table.metric {
                BenchmarkKind::Coverage => sum / n,
                BenchmarkKind::Bug => 100.0 * sum / n,
            };
            FuzzerAggregate {
                fuzzer: fuzzer.clone(),
                score,
            }
        })
        .collect())
}

/// Mean first-crash time of one fuzzer, per bug benchmark and overall.
pub fn time_to_bug(
    fuzzer: &str,
    archive: &TrialArchive,
    bug_benchmarks: &[String],
) -> (Vec<TimeToBugEntry>, FuzzerTimeToBug) {
    let mut entries = Vec::new();
    let mut all = Vec::new();
    for bench in bug_benchmarks {
        let times: Vec<u64> = archive
            .trials_for(fuzzer, bench)
            .filter_map(|t| t.first_crash_t_s)
            .collect();
        if times.is_empty() {
            continue;
        }
        entries.push(TimeToBugEntry {
            benchmark: bench.clone(),
            fuzzer: fuzzer.to_string(),
            mean_s: mean_u64(&times),
            crashing_trials: times.len(),
        });
        all.extend(times);
    }
    let overall = FuzzerTimeToBug {
        fuzzer: fuzzer.to_string(),
        mean_s: (!all.is_empty()).then(|| mean_u64(&all)),
        crashing_trials: all.len(),
    };
    (entries, overall)
}

pub fn time_to_bug_table(fuzzers: &[String], archive: &TrialArchive, bug_benchmarks: &[String]) -> TimeToBugTable {
    let mut table = TimeToBugTable::default();
    for f in fuzzers {
        let (entries, overall) = time_to_bug(f, archive, bug_benchmarks);
        table.entries.extend(entries);
        table.overall.push(overall);
    }
    table
        .entries
        .sort_by(|a, b| (&a.benchmark, &a.fuzzer).cmp(&(&b.benchmark, &b.fuzzer)));
    table
}

fn mean_u64(values: &[u64]) -> f64 {
    values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64
}

//! Assembles the full [`AnalysisBundle`] from a config and its trial archive.
//!
//! The bundle is the stable, machine-readable output of `fuzzrank analyze`
//! (`analysis.json`) and the only input to report rendering besides the
//! coverage growth curves.

use serde::{Deserialize, Serialize};

use crate::model::{BenchmarkKind, ExperimentConfig, TrialArchive, TrialRecord, Visibility};
use crate::scoring::{
    aggregate_scores, bug_indicator, final_coverage, score_table, time_to_bug_table, FuzzerAggregate, ScoreTable,
    TimeToBugTable,
};
use crate::stats::{
    self, average_rank_ranking, benchmark_discrimination, critical_difference, mann_whitney_u,
    relative_to_best_ranking, similarity_from_profiles, similarity_matrix, vargha_delaney_a12, CriticalDifference,
    Discrimination, Ranking, SimilarityMatrix, StatsError,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    /// Nemenyi significance level: 0.05 or 0.10.
    pub alpha: f64,
    pub coverage: bool,
    pub bug: bool,
    /// Also compute cosine similarity over raw median coverage profiles.
    pub raw_similarity: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            alpha: 0.05,
            coverage: true,
            bug: true,
            raw_similarity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub id: String,
    pub kind: BenchmarkKind,
    pub visibility: Visibility,
    pub trials_present: usize,
    pub analyzed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub config_fingerprint: String,
    pub trials: u32,
    pub duration_s: u64,
    pub snapshot_interval_s: u64,
    pub alpha: f64,
    pub fuzzers: Vec<String>,
    pub benchmarks: Vec<BenchmarkSummary>,
}

/// Scores, rankings and derived statistics for one metric family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyAnalysis {
    pub scores: ScoreTable,
    pub aggregates: Vec<FuzzerAggregate>,
    pub average_rank: Ranking,
    pub relative_to_best: Ranking,
    pub critical_difference: Option<CriticalDifference>,
    pub similarity: SimilarityMatrix,
    pub discrimination: Vec<Discrimination>,
}

impl FamilyAnalysis {
    pub fn aggregate_for(&self, fuzzer: &str) -> Option<f64> {
        self.aggregates.iter().find(|a| a.fuzzer == fuzzer).map(|a| a.score)
    }
}

/// Â₁₂ and Mann-Whitney U between two fuzzers on one benchmark.
/// Coverage benchmarks compare final coverage per trial; bug benchmarks
/// compare the found/not-found indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub benchmark: String,
    pub metric: BenchmarkKind,
    pub fuzzer_a: String,
    pub fuzzer_b: String,
    pub u_statistic: f64,
    pub p_value: f64,
    pub a12: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisBundle {
    pub schema_version: u32,
    pub experiment: ExperimentSummary,
    pub coverage: Option<FamilyAnalysis>,
    pub bug: Option<FamilyAnalysis>,
    pub time_to_bug: TimeToBugTable,
    pub pairwise: Vec<PairwiseComparison>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage_similarity_raw: Option<SimilarityMatrix>,
    pub warnings: Vec<String>,
}

impl AnalysisBundle {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn family(&self, kind: BenchmarkKind) -> Option<&FamilyAnalysis> {
        match kind {
            BenchmarkKind::Coverage => self.coverage.as_ref(),
            BenchmarkKind::Bug => self.bug.as_ref(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("archive fingerprint {archive} does not match config fingerprint {config}")]
    FingerprintMismatch { archive: String, config: String },
}

/// Per-trial values for one fuzzer on one benchmark, padded with zeros up to
/// the configured trial count.
fn trial_values(
    archive: &TrialArchive,
    fuzzer: &str,
    benchmark: &str,
    kind: BenchmarkKind,
    expected: usize,
) -> Vec<f64> {
    let mut v: Vec<f64> = archive
        .trials_for(fuzzer, benchmark)
        .map(|t| match kind {
            BenchmarkKind::Coverage => final_coverage(t) as f64,
            BenchmarkKind::Bug => f64::from(bug_indicator(t)),
        })
        .collect();
    if v.len() < expected {
        v.resize(expected, 0.0);
    }
    v
}

fn family(table: ScoreTable, alpha: f64, warnings: &mut Vec<String>) -> Result<FamilyAnalysis, StatsError> {
    let k = table.fuzzers.len();
    let critical_difference = match critical_difference(&table, alpha) {
        Ok(cd) => Some(cd),
        Err(e @ (StatsError::TooFewFuzzers(_) | StatsError::UnsupportedK(_))) => {
            warnings.push(format!(
                "{} critical difference not computed for {k} fuzzer(s): {e}",
                table.metric
            ));
            None
        }
        Err(e) => return Err(e),
    };
    let relative_to_best = relative_to_best_ranking(&table)?;
    if table.metric == BenchmarkKind::Bug {
        for b in &relative_to_best.degenerate_benchmarks {
            warnings.push(format!(
                "bug benchmark {b}: no fuzzer's median trial found the bug; counts 100 for everyone in the relative-to-best ranking"
            ));
        }
    }
    Ok(FamilyAnalysis {
        aggregates: aggregate_scores(&table)?,
        average_rank: average_rank_ranking(&table)?,
        relative_to_best,
        critical_difference,
        similarity: similarity_matrix(&table)?,
        discrimination: benchmark_discrimination(&table),
        scores: table,
    })
}

fn check_alpha(alpha: f64) -> Result<(), StatsError> {
    stats::nemenyi_q(2, alpha).map(|_| ())
}

/// Scores, ranks and compares every fuzzer on every benchmark that has at
/// least one trial in the archive.
pub fn analyze(
    config: &ExperimentConfig,
    archive: &TrialArchive,
    options: &AnalysisOptions,
) -> Result<AnalysisBundle, AnalysisError> {
    check_alpha(options.alpha)?;
    let fingerprint = config.fingerprint();
    if archive.config_fingerprint != fingerprint {
        return Err(AnalysisError::FingerprintMismatch {
            archive: archive.config_fingerprint.clone(),
            config: fingerprint,
        });
    }
    let expected = config.trials as usize;
    let fuzzers = config.fuzzer_ids();
    let present = archive.benchmark_ids();
    let mut warnings = Vec::new();

    let wanted = |kind: BenchmarkKind| match kind {
        BenchmarkKind::Coverage => options.coverage,
        BenchmarkKind::Bug => options.bug,
    };
    let mut summaries = Vec::new();
    for b in &config.benchmarks {
        let trials_present = archive.trials_on(&b.id).count();
        let analyzed = wanted(b.kind) && present.contains(b.id.as_str());
        if wanted(b.kind) && !analyzed {
            warnings.push(format!("benchmark {} has no trials in the archive; excluded", b.id));
        }
        summaries.push(BenchmarkSummary {
            id: b.id.clone(),
            kind: b.kind,
            visibility: b.visibility,
            trials_present,
            analyzed,
        });
    }
    let analyzed_of = |kind: BenchmarkKind| -> Vec<String> {
        summaries
            .iter()
            .filter(|s| s.kind == kind && s.analyzed)
            .map(|s| s.id.clone())
            .collect()
    };
    let coverage_ids = analyzed_of(BenchmarkKind::Coverage);
    let bug_ids = analyzed_of(BenchmarkKind::Bug);

    for s in summaries.iter().filter(|s| s.analyzed) {
        for f in &fuzzers {
            let trials: Vec<&TrialRecord> = archive.trials_for(f, &s.id).collect();
            let absent = expected - trials.len().min(expected);
            if absent > 0 {
                warnings.push(format!(
                    "fuzzer {f} on benchmark {}: {absent} of {expected} trials absent (scored as zero)",
                    s.id
                ));
            }
            let crashes = trials.iter().filter(|t| t.first_crash_t_s.is_some()).count();
            if s.kind == BenchmarkKind::Coverage && crashes > 0 {
                warnings.push(format!(
                    "fuzzer {f} on coverage benchmark {}: crash recorded in {crashes} trial(s); not scored",
                    s.id
                ));
            }
        }
    }

    let coverage = if coverage_ids.is_empty() {
        None
    } else {
        let table = score_table(config, archive, BenchmarkKind::Coverage, &coverage_ids)?;
        for b in &table.degenerate {
            warnings.push(format!(
                "coverage benchmark {b} is degenerate: no trial covered any line; all scores are 0"
            ));
        }
        Some(family(table, options.alpha, &mut warnings)?)
    };
    let bug = if bug_ids.is_empty() {
        None
    } else {
        let table = score_table(config, archive, BenchmarkKind::Bug, &bug_ids)?;
        Some(family(table, options.alpha, &mut warnings)?)
    };

    let mut pairwise = Vec::new();
    for s in summaries.iter().filter(|s| s.analyzed) {
        let values: Vec<Vec<f64>> = fuzzers
            .iter()
            .map(|f| trial_values(archive, f, &s.id, s.kind, expected))
            .collect();
        for i in 0..fuzzers.len() {
            for j in i + 1..fuzzers.len() {
                let mw = mann_whitney_u(&values[i], &values[j])?;
                pairwise.push(PairwiseComparison {
                    benchmark: s.id.clone(),
                    metric: s.kind,
                    fuzzer_a: fuzzers[i].clone(),
                    fuzzer_b: fuzzers[j].clone(),
                    u_statistic: mw.u,
                    p_value: mw.p,
                    a12: vargha_delaney_a12(&values[i], &values[j])?,
                });
            }
        }
    }

    let coverage_similarity_raw = if options.raw_similarity && !coverage_ids.is_empty() {
        let profiles: Vec<Vec<f64>> = fuzzers
            .iter()
            .map(|f| {
                coverage_ids
                    .iter()
                    .map(|b| stats::median(&trial_values(archive, f, b, BenchmarkKind::Coverage, expected)))
                    .collect::<Result<Vec<f64>, _>>()
            })
            .collect::<Result<_, _>>()?;
        Some(similarity_from_profiles(&fuzzers, &profiles)?)
    } else {
        None
    };

    let time_to_bug = time_to_bug_table(&fuzzers, archive, &bug_ids);

    Ok(AnalysisBundle {
        schema_version: SCHEMA_VERSION,
        experiment: ExperimentSummary {
            name: config.name.clone(),
            config_fingerprint: config.fingerprint(),
            trials: config.trials,
            duration_s: config.duration_s,
            snapshot_interval_s: config.snapshot_interval_s,
            alpha: options.alpha,
            fuzzers,
            benchmarks: summaries,
        },
        coverage,
        bug,
        time_to_bug,
        pairwise,
        coverage_similarity_raw,
        warnings,
    })
}

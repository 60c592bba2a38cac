//! Deterministic report rendering: `report.md`, CSV tables and SVG plots.
//!
//! Everything is rendered from an [`AnalysisBundle`] except the coverage
//! growth plots, which need the per-tick samples and are computed from the
//! archive with [`growth_curves`].

mod markdown;
mod svg;
mod tables;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::AnalysisBundle;
use crate::model::{BenchmarkKind, ExperimentConfig, TrialArchive};
use crate::stats;

pub use markdown::render_markdown;
pub use svg::{plot_coverage_growth, plot_critical_difference, plot_similarity, HEIGHT, WIDTH};
pub use tables::{emit_tables, TABLE_NAMES};

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthSeries {
    pub fuzzer: String,
    /// Median lines covered at each tick.
    pub median_lines: Vec<f64>,
}

/// Median coverage curves for one benchmark; `series` is in legend order
/// (final median descending, then fuzzer id).
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthCurves {
    pub benchmark: String,
    pub duration_s: u64,
    pub ticks: Vec<u64>,
    pub series: Vec<GrowthSeries>,
    pub has_samples: bool,
}

/// Builds growth curves at every snapshot tick. A trial without a sample at
/// a tick carries its previous value forward; absent trials count as 0.
pub fn growth_curves(config: &ExperimentConfig, archive: &TrialArchive, benchmark: &str) -> GrowthCurves {
    let ticks: Vec<u64> = (1..=config.tick_count())
        .map(|k| k * config.snapshot_interval_s)
        .collect();
    let expected = config.trials as usize;
    let mut has_samples = false;
    let mut series: Vec<GrowthSeries> = config
        .fuzzer_ids()
        .into_iter()
        .map(|fuzzer| {
            let trials: Vec<_> = archive.trials_for(&fuzzer, benchmark).collect();
            has_samples |= trials.iter().any(|t| !t.samples.is_empty());
            let median_lines = ticks
                .iter()
                .map(|&tick| {
                    let mut values: Vec<f64> = trials
                        .iter()
                        .map(|t| {
                            t.samples
                                .iter()
                                .take_while(|s| s.t_s <= tick)
                                .last()
                                .map_or(0.0, |s| s.lines_covered as f64)
                        })
                        .collect();
                    values.resize(values.len().max(expected).max(1), 0.0);
                    stats::median(&values).expect("non-empty")
                })
                .collect();
            GrowthSeries { fuzzer, median_lines }
        })
        .collect();
    let last = |s: &GrowthSeries| s.median_lines.last().copied().unwrap_or(0.0);
    series.sort_by(|a, b| last(b).total_cmp(&last(a)).then_with(|| a.fuzzer.cmp(&b.fuzzer)));
    GrowthCurves {
        benchmark: benchmark.to_string(),
        duration_s: config.duration_s,
        ticks,
        series,
        has_samples,
    }
}

/// Growth curves for every analyzed benchmark, in config order.
pub fn all_growth_curves(
    config: &ExperimentConfig,
    archive: &TrialArchive,
    bundle: &AnalysisBundle,
) -> Vec<GrowthCurves> {
    bundle
        .experiment
        .benchmarks
        .iter()
        .filter(|b| b.analyzed)
        .map(|b| growth_curves(config, archive, &b.id))
        .collect()
}

/// The full report tree as relative path → contents.
pub fn render_report(bundle: &AnalysisBundle, growth: &[GrowthCurves]) -> BTreeMap<PathBuf, String> {
    let mut files = BTreeMap::new();
    files.insert(PathBuf::from("report.md"), render_markdown(bundle, growth));
    for (name, text) in emit_tables(bundle) {
        files.insert(Path::new("data").join(name), text);
    }
    let plots = Path::new("plots");
    for g in growth {
        files.insert(
            plots.join(format!("coverage_{}.svg", g.benchmark)),
            plot_coverage_growth(g),
        );
    }
    for kind in [BenchmarkKind::Coverage, BenchmarkKind::Bug] {
        if let Some(cd) = bundle.family(kind).and_then(|f| f.critical_difference.as_ref()) {
            files.insert(
                plots.join(format!("critical_difference_{kind}.svg")),
                plot_critical_difference(cd),
            );
        }
    }
    if let Some((kind, fam)) = [BenchmarkKind::Coverage, BenchmarkKind::Bug]
        .into_iter()
        .find_map(|k| bundle.family(k).map(|f| (k, f)))
    {
        files.insert(
            plots.join("similarity.svg"),
            plot_similarity(&fam.similarity, &format!("Cosine similarity of {kind} score profiles")),
        );
    }
    files
}

/// Replaces `dir` with the rendered tree.
pub fn write_report(dir: &Path, files: &BTreeMap<PathBuf, String>) -> std::io::Result<()> {
    if dir.exists() {
        fs::remove_dir_all(dir)?;
    }
    for (rel, text) in files {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;

use std::cmp::Ordering;
use std::fmt::Write;

use super::GrowthCurves;
use crate::analysis::{AnalysisBundle, FamilyAnalysis, PairwiseComparison};
use crate::model::{BenchmarkKind, Visibility};
use crate::stats::{Ranking, SimilarityMatrix};

fn score(v: f64) -> String {
    format!("{v:.2}")
}

fn p_value(v: f64) -> String {
    format!("{v:.4}")
}

/// Integers print bare, anything else with two decimals.
fn count(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round())
    } else {
        format!("{v:.2}")
    }
}

fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", " --- |".repeat(header.len()));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out.push('\n');
}

fn ranking_table(out: &mut String, r: &Ranking, value_label: &str) {
    let mut entries: Vec<_> = r.entries.iter().collect();
    entries.sort_by(|a, b| a.rank.total_cmp(&b.rank).then_with(|| a.fuzzer.cmp(&b.fuzzer)));
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|e| vec![count(e.rank), e.fuzzer.clone(), score(e.value)])
        .collect();
    table(out, &["Rank", "Fuzzer", value_label], &rows);
}

fn family_rankings(out: &mut String, fam: &FamilyAnalysis, kind: BenchmarkKind) {
    let _ = writeln!(out, "### Average rank (lower is better)\n");
    ranking_table(out, &fam.average_rank, "Average rank");
    let _ = writeln!(out, "### Relative to best (higher is better)\n");
    ranking_table(out, &fam.relative_to_best, "Relative-to-best score");
    match &fam.critical_difference {
        Some(cd) => {
            let _ = writeln!(
                out,
                "Friedman chi-squared = {}, p = {}. Nemenyi critical difference at alpha = {}: {:.4} over {} benchmarks.\n",
                score(cd.friedman_statistic),
                p_value(cd.friedman_p),
                cd.alpha,
                cd.cd_value,
                cd.n_benchmarks
            );
            let _ = writeln!(
                out,
                "![Critical difference diagram](plots/critical_difference_{kind}.svg)\n"
            );
        }
        None => {
            let _ = writeln!(
                out,
                "No critical difference diagram (fewer than 2 or more than 20 fuzzers).\n"
            );
        }
    }
}

fn summary(out: &mut String, bundle: &AnalysisBundle) {
    let e = &bundle.experiment;
    let _ = writeln!(out, "## Experiment summary\n");
    let _ = writeln!(out, "- Config fingerprint: `{}`", e.config_fingerprint);
    let _ = writeln!(out, "- Fuzzers ({}): {}", e.fuzzers.len(), e.fuzzers.join(", "));
    for kind in [BenchmarkKind::Coverage, BenchmarkKind::Bug] {
        let of_kind = || e.benchmarks.iter().filter(|b| b.kind == kind);
        let public = of_kind().filter(|b| b.visibility == Visibility::Public).count();
        let analyzed = of_kind().filter(|b| b.analyzed).count();
        let total = of_kind().count();
        let _ = writeln!(
            out,
            "- {kind} benchmarks: {total} ({public} public / {} private), {analyzed} analyzed",
            total - public
        );
    }
    let _ = writeln!(
        out,
        "- Trials per pair: {}; duration {} s; snapshot interval {} s",
        e.trials, e.duration_s, e.snapshot_interval_s
    );
    let _ = writeln!(out, "- Significance level: {}\n", e.alpha);
}

fn coverage_section(out: &mut String, bundle: &AnalysisBundle) {
    let _ = writeln!(out, "## Coverage rankings\n");
    let Some(fam) = &bundle.coverage else {
        let _ = writeln!(out, "No coverage benchmarks were analyzed.\n");
        return;
    };
    let mut aggs: Vec<_> = fam.aggregates.iter().collect();
    aggs.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.fuzzer.cmp(&b.fuzzer)));
    let rows: Vec<Vec<String>> = aggs.iter().map(|a| vec![a.fuzzer.clone(), score(a.score)]).collect();
    let _ = writeln!(out, "### Mean relative median coverage score\n");
    table(out, &["Fuzzer", "Mean score"], &rows);
    family_rankings(out, fam, BenchmarkKind::Coverage);
}

fn bug_section(out: &mut String, bundle: &AnalysisBundle) {
    let _ = writeln!(out, "## Bug ranking\n");
    let Some(fam) = &bundle.bug else {
        let _ = writeln!(out, "No bug benchmarks were analyzed.\n");
        return;
    };
    let n = fam.scores.benchmarks.len();
    struct Row<'a> {
        fuzzer: &'a str,
        aggregate: f64,
        found: f64,
        ttb: Option<f64>,
        crashing: usize,
    }
    let mut rows: Vec<Row> = fam
        .aggregates
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let overall = bundle.time_to_bug.overall.iter().find(|o| o.fuzzer == a.fuzzer);
            Row {
                fuzzer: &a.fuzzer,
                aggregate: a.score,
                found: fam.scores.profile(i).iter().sum(),
                ttb: overall.and_then(|o| o.mean_s),
                crashing: overall.map_or(0, |o| o.crashing_trials),
            }
        })
        .collect();
    let ttb_cmp = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    };
    rows.sort_by(|a, b| {
        b.aggregate
            .total_cmp(&a.aggregate)
            .then_with(|| ttb_cmp(a.ttb, b.ttb))
            .then_with(|| a.fuzzer.cmp(b.fuzzer))
    });
    let mut cells = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let rank = rows[..i]
            .iter()
            .position(|o| (o.aggregate - r.aggregate).abs() < 1e-9 && ttb_cmp(o.ttb, r.ttb).is_eq())
            .unwrap_or(i)
            + 1;
        cells.push(vec![
            rank.to_string(),
            r.fuzzer.to_string(),
            format!("{} of {n}", count(r.found)),
            score(r.aggregate),
            r.ttb.map_or_else(|| "-".to_string(), score),
            r.crashing.to_string(),
        ]);
    }
    table(
        out,
        &[
            "Rank",
            "Fuzzer",
            "Bugs found (median)",
            "Bug score",
            "Mean time to bug (s)",
            "Crashing trials",
        ],
        &cells,
    );
    let _ = writeln!(
        out,
        "Sorted by bug score, then by mean time to bug over crashing trials (shorter first).\n"
    );
    family_rankings(out, fam, BenchmarkKind::Bug);
}

fn pairwise_matrix(out: &mut String, fuzzers: &[String], pairs: &[&PairwiseComparison]) {
    let mut rows = Vec::new();
    for a in fuzzers {
        let mut row = vec![a.clone()];
        for b in fuzzers {
            let cell = if a == b {
                "-".to_string()
            } else if let Some(p) = pairs.iter().find(|p| &p.fuzzer_a == a && &p.fuzzer_b == b) {
                format!("{} / {}", score(p.a12), p_value(p.p_value))
            } else if let Some(p) = pairs.iter().find(|p| &p.fuzzer_a == b && &p.fuzzer_b == a) {
                format!("{} / {}", score(1.0 - p.a12), p_value(p.p_value))
            } else {
                "-".to_string()
            };
            row.push(cell);
        }
        rows.push(row);
    }
    let mut header = vec!["A12 / p (row vs column)"];
    header.extend(fuzzers.iter().map(String::as_str));
    table(out, &header, &rows);
}

fn benchmark_sections(out: &mut String, bundle: &AnalysisBundle, growth: &[GrowthCurves]) {
    let _ = writeln!(out, "## Per-benchmark results\n");
    let fuzzers = &bundle.experiment.fuzzers;
    for b in bundle.experiment.benchmarks.iter().filter(|b| b.analyzed) {
        let _ = writeln!(out, "### {} ({}, {})\n", b.id, b.kind, b.visibility);
        let Some(fam) = bundle.family(b.kind) else { continue };
        let label = match b.kind {
            BenchmarkKind::Coverage => "Relative median coverage",
            BenchmarkKind::Bug => "Median bug found",
        };
        let rows: Vec<Vec<String>> = fuzzers
            .iter()
            .map(|f| {
                let s = fam.scores.get(&b.id, f).unwrap_or(0.0);
                let mut row = vec![f.clone(), score(s)];
                if b.kind == BenchmarkKind::Bug {
                    let ttb = bundle
                        .time_to_bug
                        .entries
                        .iter()
                        .find(|e| e.benchmark == b.id && &e.fuzzer == f);
                    row.push(ttb.map_or_else(|| "-".to_string(), |e| score(e.mean_s)));
                }
                row
            })
            .collect();
        match b.kind {
            BenchmarkKind::Coverage => table(out, &["Fuzzer", label], &rows),
            BenchmarkKind::Bug => table(out, &["Fuzzer", label, "Mean time to bug (s)"], &rows),
        }
        let pairs: Vec<_> = bundle.pairwise.iter().filter(|p| p.benchmark == b.id).collect();
        if !pairs.is_empty() {
            pairwise_matrix(out, fuzzers, &pairs);
        }
        if growth.iter().any(|g| g.benchmark == b.id) {
            let _ = writeln!(out, "![Coverage growth on {0}](plots/coverage_{0}.svg)\n", b.id);
        }
    }
}

fn similarity_table(out: &mut String, m: &SimilarityMatrix) {
    let rows: Vec<Vec<String>> = m
        .fuzzers
        .iter()
        .zip(&m.values)
        .map(|(f, row)| {
            let mut r = vec![f.clone()];
            r.extend(row.iter().map(|v| v.map_or_else(|| "n/a".to_string(), score)));
            r
        })
        .collect();
    let mut header = vec!["Cosine similarity"];
    header.extend(m.fuzzers.iter().map(String::as_str));
    table(out, &header, &rows);
}

fn similarity_section(out: &mut String, bundle: &AnalysisBundle) {
    let _ = writeln!(out, "## Similarity\n");
    let mut any = false;
    for kind in [BenchmarkKind::Coverage, BenchmarkKind::Bug] {
        if let Some(fam) = bundle.family(kind) {
            let _ = writeln!(out, "### {kind} score profiles\n");
            similarity_table(out, &fam.similarity);
            any = true;
        }
    }
    if let Some(raw) = &bundle.coverage_similarity_raw {
        let _ = writeln!(out, "### raw median coverage profiles\n");
        similarity_table(out, raw);
    }
    if any {
        let _ = writeln!(out, "![Similarity heatmap](plots/similarity.svg)\n");
    } else {
        let _ = writeln!(out, "Nothing to compare.\n");
    }
}

fn discrimination_section(out: &mut String, bundle: &AnalysisBundle) {
    let _ = writeln!(out, "## Benchmark discrimination\n");
    let mut rows = Vec::new();
    for kind in [BenchmarkKind::Coverage, BenchmarkKind::Bug] {
        if let Some(fam) = bundle.family(kind) {
            for d in &fam.discrimination {
                rows.push(vec![
                    d.benchmark.clone(),
                    kind.to_string(),
                    score(d.std_dev),
                    score(d.iqr),
                    score(d.min),
                    score(d.max),
                ]);
            }
        }
    }
    table(out, &["Benchmark", "Metric", "Std dev", "IQR", "Min", "Max"], &rows);
}

fn warnings_section(out: &mut String, bundle: &AnalysisBundle) {
    let _ = writeln!(out, "## Warnings\n");
    if bundle.warnings.is_empty() {
        let _ = writeln!(out, "None.");
    }
    for w in &bundle.warnings {
        let _ = writeln!(out, "- {w}");
    }
}

/// Renders `report.md`.
pub fn render_markdown(bundle: &AnalysisBundle, growth: &[GrowthCurves]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Fuzzer benchmark report: {}\n", bundle.experiment.name);
    summary(&mut out, bundle);
    coverage_section(&mut out, bundle);
    bug_section(&mut out, bundle);
    benchmark_sections(&mut out, bundle, growth);
    similarity_section(&mut out, bundle);
    discrimination_section(&mut out, bundle);
    warnings_section(&mut out, bundle);
    out
}

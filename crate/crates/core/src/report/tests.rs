use super::*;
use crate::analysis::{analyze, AnalysisOptions};
use crate::model::{BenchmarkSpec, CoverageSample, FuzzerSpec, TrialRecord, Visibility};

fn config(fuzzers: &[&str], kinds: &[BenchmarkKind], trials: u32) -> ExperimentConfig {
    ExperimentConfig {
        name: "r".into(),
        trials,
        duration_s: 30,
        snapshot_interval_s: 10,
        worker_limit: 1,
        rng_seed: 0,
        fuzzers: fuzzers
            .iter()
            .map(|id| FuzzerSpec {
                id: id.to_string(),
                run_command: vec!["x".into()],
                environment: Default::default(),
            })
            .collect(),
        benchmarks: kinds
            .iter()
            .enumerate()
            .map(|(i, &kind)| BenchmarkSpec {
                id: format!("b{i}"),
                kind,
                visibility: if i % 2 == 0 {
                    Visibility::Public
                } else {
                    Visibility::Private
                },
                target_command: vec!["t".into()],
                probe_command: vec!["p".into()],
                seed_corpus_dir: None,
                notes: None,
            })
            .collect(),
    }
}

fn trial(f: &str, b: &str, i: u32, lines: &[u64], crash: Option<u64>) -> TrialRecord {
    TrialRecord {
        fuzzer_id: f.into(),
        benchmark_id: b.into(),
        trial_index: i,
        samples: lines
            .iter()
            .enumerate()
            .map(|(k, &l)| CoverageSample {
                t_s: 10 * (k as u64 + 1),
                lines_covered: l,
            })
            .collect(),
        first_crash_t_s: crash,
    }
}

/// Data rows of the first markdown table after `heading`.
fn table_rows<'a>(md: &'a str, heading: &str) -> Vec<&'a str> {
    let start = md.find(heading).unwrap_or_else(|| panic!("{heading} missing"));
    md[start..]
        .lines()
        .skip_while(|l| !l.starts_with('|'))
        .take_while(|l| l.starts_with('|'))
        .skip(2)
        .collect()
}

fn two_fuzzer_bundle() -> (ExperimentConfig, TrialArchive, AnalysisBundle) {
    let cfg = config(&["aa", "bb"], &[BenchmarkKind::Coverage, BenchmarkKind::Bug], 3);
    let mut trials = Vec::new();
    for i in 1..=3 {
        trials.push(trial("aa", "b0", i, &[5, 10, 20], None));
        trials.push(trial("bb", "b0", i, &[1, 2, 3], None));
        trials.push(trial("aa", "b1", i, &[1, 1, 1], Some(20)));
        trials.push(trial("bb", "b1", i, &[1, 1, 1], (i == 1).then_some(30)));
    }
    let archive = TrialArchive::new(cfg.fingerprint(), trials);
    let bundle = analyze(&cfg, &archive, &AnalysisOptions::default()).unwrap();
    (cfg, archive, bundle)
}

#[test]
fn two_fuzzers_give_two_rows_per_ranking_table() {
    let (cfg, archive, bundle) = two_fuzzer_bundle();
    let md = render_markdown(&bundle, &all_growth_curves(&cfg, &archive, &bundle));
    let cov = &md[md.find("## Coverage rankings").unwrap()..md.find("## Bug ranking").unwrap()];
    let bug = &md[md.find("## Bug ranking").unwrap()..md.find("## Per-benchmark").unwrap()];
    for section in [cov, bug] {
        assert_eq!(table_rows(section, "### Average rank").len(), 2);
        assert_eq!(table_rows(section, "### Relative to best").len(), 2);
    }
    assert_eq!(table_rows(bug, "## Bug ranking").len(), 2);
    assert_eq!(table_rows(cov, "### Mean relative").len(), 2);
}

#[test]
fn sections_appear_in_order() {
    let (cfg, archive, bundle) = two_fuzzer_bundle();
    let md = render_markdown(&bundle, &all_growth_curves(&cfg, &archive, &bundle));
    let headings = [
        "## Experiment summary",
        "## Coverage rankings",
        "## Bug ranking",
        "## Per-benchmark results",
        "## Similarity",
        "## Benchmark discrimination",
        "## Warnings",
    ];
    let pos: Vec<usize> = headings.iter().map(|h| md.find(h).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{pos:?}");
    assert!(md.contains("- coverage benchmarks: 1 (1 public / 0 private), 1 analyzed"));
    assert!(md.contains("| aa | - | 1.00 / 0.0469 |"), "{md}");
}

#[test]
fn bug_table_shape_and_tiebreak() {
    // 15 bug benchmarks; "best" finds 8 in every trial, "fast" and "slow"
    // find 8 too but "fast" crashes earlier; "none" finds nothing.
    let kinds = vec![BenchmarkKind::Bug; 15];
    let cfg = config(&["slow", "fast", "best", "none"], &kinds, 1);
    let mut trials = Vec::new();
    for b in 0..15 {
        let id = format!("b{b}");
        let hit = b < 8;
        trials.push(trial("best", &id, 1, &[1, 1, 1], hit.then_some(20)));
        trials.push(trial("fast", &id, 1, &[1, 1, 1], hit.then_some(10)));
        trials.push(trial("slow", &id, 1, &[1, 1, 1], hit.then_some(30)));
        trials.push(trial("none", &id, 1, &[1, 1, 1], None));
    }
    let archive = TrialArchive::new(cfg.fingerprint(), trials);
    let bundle = analyze(&cfg, &archive, &AnalysisOptions::default()).unwrap();
    let md = render_markdown(&bundle, &[]);
    let rows = table_rows(&md, "## Bug ranking");
    assert_eq!(
        rows,
        vec![
            "| 1 | fast | 8 of 15 | 53.33 | 10.00 | 8 |",
            "| 2 | best | 8 of 15 | 53.33 | 20.00 | 8 |",
            "| 3 | slow | 8 of 15 | 53.33 | 30.00 | 8 |",
            "| 4 | none | 0 of 15 | 0.00 | - | 0 |",
        ]
    );
}

#[test]
fn mid_average_bug_median_prints_half() {
    let cfg = config(&["f", "g"], &[BenchmarkKind::Bug], 20);
    let trials = (1..=20)
        .flat_map(|i| {
            [
                trial("f", "b0", i, &[1], (i <= 10).then_some(10)),
                trial("g", "b0", i, &[1], None),
            ]
        })
        .collect();
    let archive = TrialArchive::new(cfg.fingerprint(), trials);
    let bundle = analyze(&cfg, &archive, &AnalysisOptions::default()).unwrap();
    let md = render_markdown(&bundle, &[]);
    let rows = table_rows(&md, "### b0 (bug, public)");
    assert_eq!(rows[0], "| f | 0.50 | 10.00 |");
    assert!(table_rows(&md, "## Bug ranking")[0].contains("| 0.50 of 1 | 50.00 |"));
}

#[test]
fn table_cardinalities_and_determinism() {
    let cfg = config(&["a", "b", "c"], &[BenchmarkKind::Coverage, BenchmarkKind::Coverage], 2);
    let mut trials = Vec::new();
    for (k, f) in ["a", "b", "c"].iter().enumerate() {
        for b in ["b0", "b1"] {
            for i in 1..=2 {
                trials.push(trial(f, b, i, &[k as u64 + i as u64], None));
            }
        }
    }
    let archive = TrialArchive::new(cfg.fingerprint(), trials);
    let bundle = analyze(&cfg, &archive, &AnalysisOptions::default()).unwrap();
    let tables = emit_tables(&bundle);
    let rows = |name: &str| tables.iter().find(|(n, _)| *n == name).unwrap().1.lines().count() - 1;
    assert_eq!(rows("coverage_scores.csv"), 6);
    assert_eq!(rows("bug_scores.csv"), 0);
    assert_eq!(rows("pairwise.csv"), 2 * 3);
    assert_eq!(rows("similarity.csv"), 9);
    assert_eq!(rows("discrimination.csv"), 2);
    assert_eq!(rows("rankings.csv"), 3 * 3);
    assert_eq!(emit_tables(&bundle), tables);
    let cov = &tables[0].1;
    assert!(cov.starts_with("benchmark,fuzzer,score\nb0,a,"), "{cov}");
    assert!(!cov.contains('\r'));

    let growth = all_growth_curves(&cfg, &archive, &bundle);
    let files = render_report(&bundle, &growth);
    assert!(files.contains_key(Path::new("plots/coverage_b1.svg")));
    assert!(files.contains_key(Path::new("plots/critical_difference_coverage.svg")));
    assert!(files.contains_key(Path::new("plots/similarity.svg")));
    assert_eq!(files.keys().filter(|k| k.starts_with("data")).count(), 7);

    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("report");
    write_report(&dir, &files).unwrap();
    let first = fs::read_to_string(dir.join("report.md")).unwrap();
    fs::write(dir.join("stale.txt"), "x").unwrap();
    write_report(&dir, &render_report(&bundle, &growth)).unwrap();
    assert_eq!(fs::read_to_string(dir.join("report.md")).unwrap(), first);
    assert!(!dir.join("stale.txt").exists());
}

#[test]
fn growth_curves_carry_forward_and_pad() {
    let cfg = config(&["lo", "hi", "gone"], &[BenchmarkKind::Coverage], 3);
    let trials = vec![
        trial("hi", "b0", 1, &[10, 20, 30], None),
        trial("hi", "b0", 2, &[12, 22, 32], None),
        trial("hi", "b0", 3, &[11, 21, 31], None),
        // second trial stops sampling after 10 s; third is absent
        trial("lo", "b0", 1, &[1, 2, 3], None),
        trial("lo", "b0", 2, &[5], None),
    ];
    let archive = TrialArchive::new(cfg.fingerprint(), trials);
    let g = growth_curves(&cfg, &archive, "b0");
    assert_eq!(g.ticks, vec![10, 20, 30]);
    let order: Vec<&str> = g.series.iter().map(|s| s.fuzzer.as_str()).collect();
    assert_eq!(order, vec!["hi", "lo", "gone"]);
    assert_eq!(g.series[0].median_lines, vec![11.0, 21.0, 31.0]);
    // lo per tick: {1,5,0} {2,5,0} {3,5,0}
    assert_eq!(g.series[1].median_lines, vec![1.0, 2.0, 3.0]);
    assert_eq!(g.series[2].median_lines, vec![0.0, 0.0, 0.0]);
    assert!(g.has_samples);
    let svg = plot_coverage_growth(&g);
    let gone = svg.lines().find(|l| l.contains(r#"data-fuzzer="gone""#)).unwrap();
    assert!(
        gone.contains("points=\"260.00,420.00 440.00,420.00 620.00,420.00\""),
        "{gone}"
    );

    let empty = growth_curves(&cfg, &archive, "missing");
    assert!(!empty.has_samples);
    assert!(plot_coverage_growth(&empty).contains("no data"));
}

#[test]
fn single_trial_linear_growth_has_one_point_per_tick() {
    let cfg = config(&["only"], &[BenchmarkKind::Coverage], 1);
    let archive = TrialArchive::new(cfg.fingerprint(), vec![trial("only", "b0", 1, &[10, 20, 30], None)]);
    let svg = plot_coverage_growth(&growth_curves(&cfg, &archive, "b0"));
    let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
    let points = line.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
    assert_eq!(points.split(' ').count(), 3);
}

#[test]
fn degenerate_benchmark_named_in_warnings() {
    let cfg = config(&["f", "g"], &[BenchmarkKind::Coverage, BenchmarkKind::Coverage], 1);
    let trials = vec![
        trial("f", "b0", 1, &[0, 0, 0], None),
        trial("g", "b0", 1, &[0, 0, 0], None),
        trial("f", "b1", 1, &[1, 2, 3], None),
        trial("g", "b1", 1, &[1, 1, 1], None),
    ];
    let archive = TrialArchive::new(cfg.fingerprint(), trials);
    let bundle = analyze(&cfg, &archive, &AnalysisOptions::default()).unwrap();
    let md = render_markdown(&bundle, &[]);
    let warnings = &md[md.find("## Warnings").unwrap()..];
    assert!(warnings.contains("coverage benchmark b0 is degenerate"), "{warnings}");
}

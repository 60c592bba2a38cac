use crate::analysis::{AnalysisBundle, FamilyAnalysis};
use crate::model::BenchmarkKind;
use crate::stats::SimilarityMatrix;

pub const TABLE_NAMES: [&str; 7] = [
    "coverage_scores.csv",
    "bug_scores.csv",
    "rankings.csv",
    "pairwise.csv",
    "similarity.csv",
    "time_to_bug.csv",
    "discrimination.csv",
];

fn csv_text(header: &[&str], mut rows: Vec<Vec<String>>) -> String {
    rows.sort();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in &rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn scores(family: Option<&FamilyAnalysis>) -> String {
    let rows = family
        .map(|f| {
            f.scores
                .iter()
                .map(|(b, fz, s)| vec![b.to_string(), fz.to_string(), num(s)])
                .collect()
        })
        .unwrap_or_default();
    csv_text(&["benchmark", "fuzzer", "score"], rows)
}

fn families(bundle: &AnalysisBundle) -> impl Iterator<Item = (BenchmarkKind, &FamilyAnalysis)> {
    [BenchmarkKind::Coverage, BenchmarkKind::Bug]
        .into_iter()
        .filter_map(|k| bundle.family(k).map(|f| (k, f)))
}

fn rankings(bundle: &AnalysisBundle) -> String {
    let mut rows = Vec::new();
    for (kind, fam) in families(bundle) {
        for r in [&fam.average_rank, &fam.relative_to_best] {
            for e in &r.entries {
                rows.push(vec![
                    kind.to_string(),
                    r.method.as_str().to_string(),
                    e.fuzzer.clone(),
                    num(e.value),
                    num(e.rank),
                ]);
            }
        }
        for a in &fam.aggregates {
            let rank = fam.aggregates.iter().filter(|o| o.score > a.score).count() + 1;
            rows.push(vec![
                kind.to_string(),
                "aggregate_score".into(),
                a.fuzzer.clone(),
                num(a.score),
                rank.to_string(),
            ]);
        }
    }
    csv_text(&["metric", "method", "fuzzer", "value", "rank"], rows)
}

fn pairwise(bundle: &AnalysisBundle) -> String {
    let rows = bundle
        .pairwise
        .iter()
        .map(|p| {
            vec![
                p.metric.to_string(),
                p.benchmark.clone(),
                p.fuzzer_a.clone(),
                p.fuzzer_b.clone(),
                num(p.u_statistic),
                num(p.p_value),
                num(p.a12),
            ]
        })
        .collect();
    csv_text(
        &[
            "metric",
            "benchmark",
            "fuzzer_a",
            "fuzzer_b",
            "u_statistic",
            "p_value",
            "a12",
        ],
        rows,
    )
}

fn similarity_rows(profile: &str, m: &SimilarityMatrix, rows: &mut Vec<Vec<String>>) {
    for (i, a) in m.fuzzers.iter().enumerate() {
        for (j, b) in m.fuzzers.iter().enumerate() {
            rows.push(vec![
                profile.to_string(),
                a.clone(),
                b.clone(),
                m.values[i][j].map(num).unwrap_or_default(),
            ]);
        }
    }
}

fn similarity(bundle: &AnalysisBundle) -> String {
    let mut rows = Vec::new();
    for (kind, fam) in families(bundle) {
        similarity_rows(kind.as_str(), &fam.similarity, &mut rows);
    }
    if let Some(raw) = &bundle.coverage_similarity_raw {
        similarity_rows("coverage_raw", raw, &mut rows);
    }
    csv_text(&["profile", "fuzzer_a", "fuzzer_b", "cosine"], rows)
}

fn time_to_bug(bundle: &AnalysisBundle) -> String {
    let t = &bundle.time_to_bug;
    let mut rows: Vec<Vec<String>> = t
        .entries
        .iter()
        .map(|e| {
            vec![
                "benchmark".into(),
                e.benchmark.clone(),
                e.fuzzer.clone(),
                num(e.mean_s),
                e.crashing_trials.to_string(),
            ]
        })
        .collect();
    rows.extend(t.overall.iter().map(|o| {
        vec![
            "overall".into(),
            String::new(),
            o.fuzzer.clone(),
            o.mean_s.map(num).unwrap_or_default(),
            o.crashing_trials.to_string(),
        ]
    }));
    csv_text(
        &["scope", "benchmark", "fuzzer", "mean_time_s", "crashing_trials"],
        rows,
    )
}

fn discrimination(bundle: &AnalysisBundle) -> String {
    let mut rows = Vec::new();
    for (kind, fam) in families(bundle) {
        for d in &fam.discrimination {
            rows.push(vec![
                kind.to_string(),
                d.benchmark.clone(),
                num(d.std_dev),
                num(d.iqr),
                num(d.min),
                num(d.max),
            ]);
        }
    }
    csv_text(&["metric", "benchmark", "std_dev", "iqr", "min", "max"], rows)
}

/// The seven CSV tables as `(file name, contents)`, in [`TABLE_NAMES`] order.
pub fn emit_tables(bundle: &AnalysisBundle) -> Vec<(&'static str, String)> {
    let contents = [
        scores(bundle.coverage.as_ref()),
        scores(bundle.bug.as_ref()),
        rankings(bundle),
        pairwise(bundle),
        similarity(bundle),
        time_to_bug(bundle),
        discrimination(bundle),
    ];
    TABLE_NAMES.into_iter().zip(contents).collect()
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fuzzrank_core::analysis::AnalysisBundle;
use fuzzrank_core::ingest::SNAPSHOT_HEADER;
use serde_json::{json, Value};

fn fuzzrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fuzzrank"))
        .args(args)
        .env("FUZZRANK_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/configs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_config(dir: &Path) -> PathBuf {
    let bench = |id: &str, vis: &str| {
        json!({"id": id, "kind": "coverage", "visibility": vis,
               "target_command": ["t"], "probe_command": ["p", "{CORPUS_DIR}"]})
    };
    let fuzzers: Vec<Value> = ["a", "b", "c"]
        .iter()
        .map(|id| json!({"id": id, "run_command": ["x"]}))
        .collect();
    let cfg = json!({
        "name": "small", "trials": 5, "duration_s": 60, "snapshot_interval_s": 15,
        "worker_limit": 2, "rng_seed": 9,
        "fuzzers": fuzzers,
        "benchmarks": [
            bench("b1", "public"), bench("b2", "public"),
            bench("b3", "public"), bench("b4", "public"),
        ],
    });
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn params(dir: &Path, bug_hazard: f64) -> PathBuf {
    let one = |max: u64| json!({"max_coverage": max, "rate": 0.05, "noise_sd": 5.0, "bug_hazard": bug_hazard});
    let path = dir.join("params.json");
    fs::write(&path, json!({"a": one(1000), "b": one(800), "c": one(600)}).to_string()).unwrap();
    path
}

#[test]
fn validate_summarizes_competition_config() {
    let out = fuzzrank(&["validate", p(&configs().join("competition.json"))]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("29 public / 24 private"), "{text}");
    assert!(text.contains("fuzzers: 12"));
    assert!(text.contains("12720 attempts"));
}

#[test]
fn validate_reports_every_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg: Value = serde_json::from_str(&fs::read_to_string(configs().join("demo.json")).unwrap()).unwrap();
    cfg["fuzzers"][2]["id"] = json!("steady");
    cfg["trials"] = json!(0);
    let path = tmp.path().join("bad.json");
    fs::write(&path, cfg.to_string()).unwrap();
    let out = fuzzrank(&["validate", p(&path)]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("fuzzers[0]") && err.contains("fuzzers[2]"), "{err}");
    assert!(err.contains("trials"), "{err}");

    let missing = fuzzrank(&["validate", "/definitely/not/here.json"]);
    assert_eq!(code(&missing), 2);
    assert_eq!(String::from_utf8_lossy(&missing.stderr).lines().count(), 1);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&fuzzrank(&[])), 2);
    assert_eq!(code(&fuzzrank(&["analyze", "d", "--metric", "speed"])), 2);
    let help = fuzzrank(&["--help"]);
    assert_eq!(code(&help), 0);
    let text = String::from_utf8_lossy(&help.stdout);
    for sub in ["validate", "run", "simulate", "analyze", "report", "FUZZRANK_LOG"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn simulate_analyze_report_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let exp = tmp.path().join("exp");
    let out = fuzzrank(&["simulate", p(&cfg), p(&params(tmp.path(), 0.0)), p(&exp)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let snaps = fs::read_to_string(exp.join("snapshots.csv")).unwrap();
    assert!(snaps.starts_with(&SNAPSHOT_HEADER.join(",")));
    assert_eq!(snaps.lines().count() - 1, 3 * 4 * 5 * (60 / 15));
    assert_eq!(fs::read_to_string(exp.join("crashes.csv")).unwrap().lines().count(), 1);

    // rerun into the same directory touches nothing
    let before = fs::read_to_string(exp.join("snapshots.csv")).unwrap();
    assert_eq!(
        code(&fuzzrank(&["simulate", p(&cfg), p(&params(tmp.path(), 0.5)), p(&exp)])),
        3
    );
    assert_eq!(fs::read_to_string(exp.join("snapshots.csv")).unwrap(), before);

    assert_eq!(code(&fuzzrank(&["report", p(&exp)])), 2);
    assert_eq!(code(&fuzzrank(&["analyze", p(&exp)])), 0);
    let first = fs::read_to_string(exp.join("analysis.json")).unwrap();
    assert_eq!(code(&fuzzrank(&["analyze", p(&exp)])), 0);
    assert_eq!(fs::read_to_string(exp.join("analysis.json")).unwrap(), first);
    let bundle = AnalysisBundle::from_json(&first).unwrap();
    assert_eq!(bundle.schema_version, 1);
    assert!(bundle.bug.is_none());
    assert_eq!(bundle.pairwise.len(), 4 * 3);

    assert_eq!(code(&fuzzrank(&["report", p(&exp)])), 0);
    let md = fs::read_to_string(exp.join("report/report.md")).unwrap();
    assert!(md.contains("### Average rank") && md.contains("### Relative to best"));
    assert_eq!(code(&fuzzrank(&["analyze", p(&exp), "--alpha", "0.2"])), 2);
}

#[test]
fn corrupt_archive_is_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let exp = tmp.path().join("exp");
    assert_eq!(
        code(&fuzzrank(&["simulate", p(&cfg), p(&params(tmp.path(), 0.0)), p(&exp)])),
        0
    );
    let snaps = fs::read_to_string(exp.join("snapshots.csv")).unwrap();
    fs::write(
        exp.join("snapshots.csv"),
        snaps.replacen("a,b1,1,15,", "a,b1,1,015,", 1),
    )
    .unwrap();
    let out = fuzzrank(&["analyze", p(&exp)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("snapshots.csv"));
}

#[test]
fn missing_params_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let params = tmp.path().join("p.json");
    fs::write(
        &params,
        r#"{"a": {"max_coverage": 5, "rate": 0.1, "noise_sd": 0, "bug_hazard": 0}}"#,
    )
    .unwrap();
    let exp = tmp.path().join("exp");
    let out = fuzzrank(&["simulate", p(&cfg), p(&params), p(&exp)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("b, c"));
    assert!(!exp.exists());
}

#[test]
fn public_run_only_touches_public_benchmarks() {
    let tmp = tempfile::tempdir().unwrap();
    let mock = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mock");
    let probe = mock.join("count_corpus.sh");
    let probe = p(&probe);
    let fuzzer = mock.join("linear_fuzzer.sh");
    let bench = |id: &str, vis: &str| {
        json!({"id": id, "kind": "coverage", "visibility": vis, "target_command": ["./t"],
               "probe_command": ["sh", probe, "{CORPUS_DIR}"]})
    };
    let cfg = json!({
        "name": "vis", "trials": 1, "duration_s": 2, "snapshot_interval_s": 1, "worker_limit": 4, "rng_seed": 0,
        "fuzzers": [{"id": "lin", "run_command": ["sh", p(&fuzzer)]}],
        "benchmarks": [bench("pub1", "public"), bench("sec1", "private"), bench("pub2", "public")],
    });
    let path = tmp.path().join("c.json");
    fs::write(&path, cfg.to_string()).unwrap();
    let exp = tmp.path().join("exp");
    let out = fuzzrank(&["run", p(&path), p(&exp), "--visibility", "public"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let snaps = fs::read_to_string(exp.join("snapshots.csv")).unwrap();
    let ids: std::collections::BTreeSet<&str> = snaps.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(ids.into_iter().collect::<Vec<_>>(), vec!["pub1", "pub2"]);

    // analysis excludes the unrun private benchmark with a warning
    assert_eq!(code(&fuzzrank(&["analyze", p(&exp)])), 0);
    let bundle = AnalysisBundle::from_json(&fs::read_to_string(exp.join("analysis.json")).unwrap()).unwrap();
    assert!(bundle.warnings.iter().any(|w| w.contains("sec1")));
    assert_eq!(code(&fuzzrank(&["run", p(&path), p(&exp)])), 3);
}

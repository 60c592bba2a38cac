use std::collections::BTreeMap;
use std::fs;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};

use super::{TrialFailure, TrialPlan};
use crate::model::{render_template, CoverageSample, ExperimentConfig, TrialRecord};

/// Kills the whole process group of a spawned fuzzer when dropped.
struct ProcessGroup {
    child: Child,
}

impl ProcessGroup {
    fn kill(&mut self) {
        // The child leads its own group (process_group(0)), so its pid is the pgid.
        let pgid = self.child.id() as libc::pid_t;
        unsafe {
            libc::kill(-pgid, libc::SIGKILL);
        }
        let _ = self.child.wait();
    }
}

impl Drop for ProcessGroup {
    fn drop(&mut self) {
        self.kill();
    }
}

fn sleep_until(deadline: Instant) {
    let now = Instant::now();
    if deadline > now {
        thread::sleep(deadline - now);
    }
}

fn has_entries(dir: &Path) -> bool {
    fs::read_dir(dir).is_ok_and(|mut it| it.next().is_some())
}

fn run_probe(argv: &[String], bindings: &BTreeMap<&str, String>, cwd: &Path, timeout: Duration) -> Result<u64, String> {
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .envs(bindings.iter().map(|(k, v)| (*k, v)))
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| format!("probe failed to start: {e}"))?;
    let deadline = Instant::now() + timeout;
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(format!("probe timed out after {}s", timeout.as_secs()));
            }
            Ok(None) => thread::sleep(Duration::from_millis(10)),
            Err(e) => return Err(format!("probe wait failed: {e}")),
        }
    }
    let out = child
        .wait_with_output()
        .map_err(|e| format!("probe output unavailable: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "probe exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    let text = String::from_utf8_lossy(&out.stdout);
    text.trim()
        .parse::<u64>()
        .map_err(|_| format!("probe printed {:?}, expected one base-10 integer", text.trim()))
}

fn mkdir(path: &Path) -> Result<(), String> {
    fs::create_dir_all(path).map_err(|e| format!("cannot create {}: {e}", path.display()))
}

/// Runs one real trial.
///
/// The fuzzer is launched as `run_command ++ target_command` with placeholders
/// bound, in a fresh working directory, with an environment containing only
/// the fuzzer's configured variables and the placeholder bindings. At every
/// snapshot tick the probe is run on the corpus and `OUTPUT_DIR/crashes/` is
/// polled; a crash is timestamped with the tick at which it is first seen.
pub fn run_trial(plan: &TrialPlan, config: &ExperimentConfig) -> Result<TrialRecord, TrialFailure> {
    let fuzzer = config
        .fuzzer(&plan.fuzzer_id)
        .ok_or_else(|| plan.fail("fuzzer not in config"))?;
    let benchmark = config
        .benchmark(&plan.benchmark_id)
        .ok_or_else(|| plan.fail("benchmark not in config"))?;

    if plan.working_dir.exists() {
        return Err(plan.fail(format!("working directory {} is not fresh", plan.working_dir.display())));
    }
    let corpus = plan.working_dir.join("corpus");
    let output = plan.working_dir.join("output");
    let crashes = output.join("crashes");
    let seeds = match &benchmark.seed_corpus_dir {
        Some(dir) => fs::canonicalize(dir).map_err(|e| plan.fail(format!("seed corpus {dir}: {e}")))?,
        None => plan.working_dir.join("seeds"),
    };
    for dir in [&corpus, &crashes, &seeds] {
        if dir.starts_with(&plan.working_dir) {
            mkdir(dir).map_err(|e| plan.fail(e))?;
        }
    }

    let path_str = |p: &PathBuf| p.to_string_lossy().into_owned();
    let bindings: BTreeMap<&str, String> = BTreeMap::from([
        ("CORPUS_DIR", path_str(&corpus)),
        ("OUTPUT_DIR", path_str(&output)),
        ("DURATION_S", config.duration_s.to_string()),
        ("SEED_DIR", path_str(&seeds)),
    ]);
    let mut argv = render_template(&fuzzer.run_command, &bindings);
    argv.extend(render_template(&benchmark.target_command, &bindings));
    let probe = render_template(&benchmark.probe_command, &bindings);

    let log_path = plan.working_dir.join("fuzzer.log");
    let log = fs::File::create(&log_path).map_err(|e| plan.fail(format!("fuzzer log: {e}")))?;
    let log_err = log.try_clone().map_err(|e| plan.fail(format!("fuzzer log: {e}")))?;

    let interval = Duration::from_secs(config.snapshot_interval_s);
    let start = Instant::now();
    debug!("{}: launching {:?}", plan.working_dir.display(), argv);
    let child = Command::new(&argv[0])
        .args(&argv[1..])
        .env_clear()
        .envs(&fuzzer.environment)
        .envs(bindings.iter().map(|(k, v)| (*k, v)))
        .current_dir(&plan.working_dir)
        .stdin(Stdio::null())
        .stdout(log)
        .stderr(log_err)
        .process_group(0)
        .spawn()
        .map_err(|e| plan.fail(format!("failed to launch fuzzer {:?}: {e}", argv[0])))?;
    let mut group = ProcessGroup { child };

    let mut samples = Vec::new();
    let mut first_crash_t_s = None;
    let mut running_max = 0u64;
    for tick in 1..=config.tick_count() {
        let t_s = tick * config.snapshot_interval_s;
        sleep_until(start + interval * tick as u32);
        if tick == 1 {
            if let Ok(Some(status)) = group.child.try_wait() {
                return Err(plan.fail(format!("exited before first snapshot ({status})")));
            }
        }
        if first_crash_t_s.is_none() && has_entries(&crashes) {
            first_crash_t_s = Some(t_s);
        }
        let lines = run_probe(
            &probe,
            &bindings,
            &plan.working_dir,
            interval.max(Duration::from_secs(10)),
        )
        .map_err(|e| plan.fail(format!("trial aborted at t={t_s}s: {e}")))?;
        if lines < running_max {
            warn!(
                "fuzzer={} benchmark={} trial={}: probe regressed from {running_max} to {lines} at t={t_s}s; clamped",
                plan.fuzzer_id, plan.benchmark_id, plan.trial_index
            );
        }
        running_max = running_max.max(lines);
        samples.push(CoverageSample {
            t_s,
            lines_covered: running_max,
        });
    }
    sleep_until(start + Duration::from_secs(config.duration_s));
    group.kill();

    Ok(TrialRecord {
        fuzzer_id: plan.fuzzer_id.clone(),
        benchmark_id: plan.benchmark_id.clone(),
        trial_index: plan.trial_index,
        samples,
        first_crash_t_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BenchmarkKind, BenchmarkSpec, FuzzerSpec, Visibility};

    fn fixture(name: &str) -> String {
        format!("{}/fixtures/mock/{name}", env!("CARGO_MANIFEST_DIR"))
    }

    fn config(run_command: Vec<String>, env: &[(&str, &str)], probe: Vec<String>) -> ExperimentConfig {
        ExperimentConfig {
            name: "trial-test".into(),
            trials: 1,
            duration_s: 6,
            snapshot_interval_s: 2,
            worker_limit: 1,
            rng_seed: 0,
            fuzzers: vec![FuzzerSpec {
                id: "mock".into(),
                run_command,
                environment: env.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            }],
            benchmarks: vec![BenchmarkSpec {
                id: "bench".into(),
                kind: BenchmarkKind::Bug,
                visibility: Visibility::Public,
                target_command: vec!["./target".into()],
                probe_command: probe,
                seed_corpus_dir: None,
                notes: None,
            }],
        }
    }

    fn count_probe() -> Vec<String> {
        vec!["sh".into(), fixture("count_corpus.sh"), "{CORPUS_DIR}".into()]
    }

    fn plan(dir: &Path) -> TrialPlan {
        TrialPlan {
            fuzzer_id: "mock".into(),
            benchmark_id: "bench".into(),
            trial_index: 1,
            working_dir: dir.join("trial-1"),
            rng_stream_seed: 0,
        }
    }

    #[test]
    fn linear_mock_grows_one_file_per_second() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config(vec!["sh".into(), fixture("linear_fuzzer.sh")], &[], count_probe());
        let rec = run_trial(&plan(tmp.path()), &cfg).unwrap();
        let times: Vec<u64> = rec.samples.iter().map(|s| s.t_s).collect();
        assert_eq!(times, vec![2, 4, 6]);
        for s in &rec.samples {
            assert!(s.lines_covered.abs_diff(s.t_s) <= 1, "{:?}", rec.samples);
        }
        assert_eq!(rec.first_crash_t_s, None);
        rec.check_samples().unwrap();
    }

    #[test]
    fn crash_is_stamped_at_next_poll_tick() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config(
            vec!["sh".into(), fixture("crash_fuzzer.sh")],
            &[("CRASH_AT_S", "3")],
            count_probe(),
        );
        let rec = run_trial(&plan(tmp.path()), &cfg).unwrap();
        assert_eq!(rec.first_crash_t_s, Some(4));
    }

    #[test]
    fn immediate_exit_is_absent() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config(vec!["true".into()], &[], count_probe());
        let err = run_trial(&plan(tmp.path()), &cfg).unwrap_err();
        assert!(err.reason.contains("exited before first snapshot"), "{}", err.reason);
    }

    #[test]
    fn probe_failure_aborts() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config(
            vec!["sh".into(), fixture("linear_fuzzer.sh")],
            &[],
            vec!["false".into()],
        );
        let err = run_trial(&plan(tmp.path()), &cfg).unwrap_err();
        assert!(err.reason.contains("trial aborted"), "{}", err.reason);
    }

    #[test]
    fn environment_is_only_spec_plus_bindings() {
        let tmp = tempfile::tempdir().unwrap();
        let script = "env | sort > \"$OUTPUT_DIR/env.txt\"; exec sleep 30";
        let cfg = config(
            vec!["/bin/sh".into(), "-c".into(), script.into()],
            &[("FOO", "bar")],
            vec!["echo".into(), "0".into()],
        );
        let p = plan(tmp.path());
        run_trial(&p, &cfg).unwrap();
        let env = fs::read_to_string(p.working_dir.join("output/env.txt")).unwrap();
        let keys: Vec<&str> = env
            .lines()
            .map(|l| l.split('=').next().unwrap())
            .filter(|k| !matches!(*k, "PWD" | "SHLVL" | "_" | "OLDPWD"))
            .collect();
        assert_eq!(keys, vec!["CORPUS_DIR", "DURATION_S", "FOO", "OUTPUT_DIR", "SEED_DIR"]);
    }

    #[test]
    fn stale_working_dir_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let p = plan(tmp.path());
        fs::create_dir_all(&p.working_dir).unwrap();
        let cfg = config(vec!["true".into()], &[], count_probe());
        assert!(run_trial(&p, &cfg).unwrap_err().reason.contains("not fresh"));
    }
}

//! Trial execution: real fuzzer processes under a per-trial isolation
//! contract, or simulated saturating-growth campaigns.
//!
//! Every trial gets a fresh working directory and a seed derived only from
//! the experiment seed and the trial's identity, so running trials in
//! parallel never changes the result.

mod simulate;
mod trial;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use log::{info, warn};
use sha2::{Digest, Sha256};

use crate::ingest::{ExperimentDir, IngestError};
use crate::model::{BenchmarkSpec, ExperimentConfig, TrialArchive, TrialRecord, Visibility};

pub use simulate::{parse_params, simulate_experiment, simulate_trial, SimulatorParams};
pub use trial::run_trial;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("experiment directory {0} already exists; refusing to overwrite")]
    DirectoryExists(PathBuf),
    #[error("no benchmarks selected by the filter")]
    NoBenchmarks,
    #[error("no simulator parameters for fuzzer(s): {}", .0.join(", "))]
    MissingParams(Vec<String>),
    #[error("invalid simulator parameters: {0}")]
    InvalidParams(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// A trial that produced no record, and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialFailure {
    pub fuzzer_id: String,
    pub benchmark_id: String,
    pub trial_index: u32,
    pub reason: String,
}

/// Identity and isolation of one trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialPlan {
    pub fuzzer_id: String,
    pub benchmark_id: String,
    pub trial_index: u32,
    pub working_dir: PathBuf,
    pub rng_stream_seed: u64,
}

impl TrialPlan {
    pub(crate) fn fail(&self, reason: impl Into<String>) -> TrialFailure {
        TrialFailure {
            fuzzer_id: self.fuzzer_id.clone(),
            benchmark_id: self.benchmark_id.clone(),
            trial_index: self.trial_index,
            reason: reason.into(),
        }
    }
}

/// Restricts which benchmarks an experiment run executes.
#[derive(Debug, Clone, Default)]
pub struct BenchmarkFilter {
    pub visibility: Option<Visibility>,
    pub benchmarks: Option<BTreeSet<String>>,
}

impl BenchmarkFilter {
    pub fn visibility(v: Visibility) -> Self {
        BenchmarkFilter {
            visibility: Some(v),
            benchmarks: None,
        }
    }

    pub fn accepts(&self, b: &BenchmarkSpec) -> bool {
        self.visibility.is_none_or(|v| v == b.visibility)
            && self.benchmarks.as_ref().is_none_or(|ids| ids.contains(&b.id))
    }
}

/// Seed for one trial's random stream: leading 8 bytes of
/// SHA-256(seed ‖ fuzzer ‖ benchmark ‖ trial).
pub fn derive_seed(rng_seed: u64, fuzzer: &str, benchmark: &str, trial_index: u32) -> u64 {
    let mut h = Sha256::new();
    h.update(rng_seed.to_le_bytes());
    for part in [fuzzer, benchmark] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    h.update(trial_index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn select_benchmarks<'a>(
    config: &'a ExperimentConfig,
    filter: &BenchmarkFilter,
) -> Result<Vec<&'a BenchmarkSpec>, RunError> {
    let selected: Vec<_> = config.benchmarks.iter().filter(|b| filter.accepts(b)).collect();
    if selected.is_empty() {
        return Err(RunError::NoBenchmarks);
    }
    Ok(selected)
}

/// Number of trial attempts an experiment makes.
pub fn attempt_count(fuzzers: usize, benchmarks: usize, trials: u32) -> u64 {
    fuzzers as u64 * benchmarks as u64 * u64::from(trials)
}

/// One plan per (fuzzer, benchmark, trial), working dirs under `work_root`.
pub fn plan_trials(config: &ExperimentConfig, benchmarks: &[&BenchmarkSpec], work_root: &Path) -> Vec<TrialPlan> {
    let mut plans = Vec::new();
    for f in &config.fuzzers {
        for b in benchmarks {
            for trial_index in 1..=config.trials {
                plans.push(TrialPlan {
                    fuzzer_id: f.id.clone(),
                    benchmark_id: b.id.clone(),
                    trial_index,
                    working_dir: work_root.join(&f.id).join(&b.id).join(format!("trial-{trial_index}")),
                    rng_stream_seed: derive_seed(config.rng_seed, &f.id, &b.id, trial_index),
                });
            }
        }
    }
    plans
}

/// Runs `job` over `plans` on up to `workers` threads; results keep plan order.
pub(crate) fn run_pool<T, F>(plans: &[TrialPlan], workers: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(&TrialPlan) -> T + Sync,
{
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<T>>> = Mutex::new((0..plans.len()).map(|_| None).collect());
    let workers = workers.clamp(1, plans.len().max(1));
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(plan) = plans.get(i) else { break };
                let out = job(plan);
                results.lock().expect("no poisoned workers")[i] = Some(out);
            });
        }
    });
    results
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every plan ran"))
        .collect()
}

/// Result of a real experiment run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub archive: TrialArchive,
    pub failures: Vec<TrialFailure>,
    pub attempts: usize,
}

/// Executes every selected trial as a real process and writes the
/// experiment directory (config copy, fingerprint, archive CSVs).
pub fn run_experiment(
    config: &ExperimentConfig,
    filter: &BenchmarkFilter,
    experiment_dir: &Path,
) -> Result<RunOutcome, RunError> {
    if experiment_dir.exists() {
        return Err(RunError::DirectoryExists(experiment_dir.to_path_buf()));
    }
    let benchmarks = select_benchmarks(config, filter)?;
    let dir = ExperimentDir::new(experiment_dir);
    let work = dir.work();
    fs::create_dir_all(&work).map_err(|source| RunError::Io {
        path: work.clone(),
        source,
    })?;

    let plans = plan_trials(config, &benchmarks, &work);
    info!(
        "running {} trials ({} fuzzers x {} benchmarks x {} trials) on {} workers",
        plans.len(),
        config.fuzzers.len(),
        benchmarks.len(),
        config.trials,
        config.worker_limit
    );
    let results = run_pool(&plans, config.worker_limit as usize, |plan| run_trial(plan, config));

    let mut records: Vec<TrialRecord> = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => {
                warn!(
                    "trial fuzzer={} benchmark={} trial={} recorded as absent: {}",
                    f.fuzzer_id, f.benchmark_id, f.trial_index, f.reason
                );
                failures.push(f);
            }
        }
    }
    let archive = TrialArchive::new(config.fingerprint(), records);
    dir.write_experiment(config, &archive)?;
    Ok(RunOutcome {
        archive,
        failures,
        attempts: plans.len(),
    })
}

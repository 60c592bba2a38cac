use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{derive_seed, plan_trials, run_pool, RunError, TrialPlan};
use crate::model::{BenchmarkKind, CoverageSample, ExperimentConfig, TrialArchive, TrialRecord};

/// Synthetic fuzzer behaviour: coverage saturates towards `max_coverage`
/// at `rate` per second with Gaussian noise, and on bug benchmarks the bug
/// is found at each poll tick with probability `bug_hazard`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatorParams {
    pub max_coverage: u64,
    pub rate: f64,
    pub noise_sd: f64,
    pub bug_hazard: f64,
}

impl SimulatorParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_coverage == 0 {
            return Err("max_coverage must be positive".into());
        }
        if !(self.rate.is_finite() && self.rate >= 0.0) {
            return Err(format!("rate {} must be a non-negative number", self.rate));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(format!("noise_sd {} must be a non-negative number", self.noise_sd));
        }
        if !(0.0..=1.0).contains(&self.bug_hazard) {
            return Err(format!("bug_hazard {} must lie in [0, 1]", self.bug_hazard));
        }
        Ok(())
    }
}

/// Parses a params file: a JSON object mapping fuzzer id to [`SimulatorParams`].
pub fn parse_params(text: &str) -> Result<BTreeMap<String, SimulatorParams>, RunError> {
    let params: BTreeMap<String, SimulatorParams> =
        serde_json::from_str(text).map_err(|e| RunError::InvalidParams(e.to_string()))?;
    for (id, p) in &params {
        p.validate()
            .map_err(|e| RunError::InvalidParams(format!("{id}: {e}")))?;
    }
    Ok(params)
}

/// Simulates one trial from its plan seed.
pub fn simulate_trial(
    plan: &TrialPlan,
    config: &ExperimentConfig,
    kind: BenchmarkKind,
    params: &SimulatorParams,
) -> TrialRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.rng_stream_seed);
    let noise = (params.noise_sd > 0.0).then(|| Normal::new(0.0, params.noise_sd).expect("validated noise_sd"));
    let mut running_max = 0u64;
    let mut samples = Vec::with_capacity(config.tick_count() as usize);
    let mut first_crash_t_s = None;
    for tick in 1..=config.tick_count() {
        let t_s = tick * config.snapshot_interval_s;
        let mean = params.max_coverage as f64 * (1.0 - (-params.rate * t_s as f64).exp());
        let jitter = noise.map_or(0.0, |n| n.sample(&mut rng));
        let lines = (mean + jitter).round().max(0.0) as u64;
        running_max = running_max.max(lines);
        samples.push(CoverageSample {
            t_s,
            lines_covered: running_max,
        });
        if kind == BenchmarkKind::Bug && first_crash_t_s.is_none() && rng.random::<f64>() < params.bug_hazard {
            first_crash_t_s = Some(t_s);
        }
    }
    TrialRecord {
        fuzzer_id: plan.fuzzer_id.clone(),
        benchmark_id: plan.benchmark_id.clone(),
        trial_index: plan.trial_index,
        samples,
        first_crash_t_s,
    }
}

/// Simulates every (fuzzer, benchmark, trial). Deterministic in
/// (config, rng_seed, params) regardless of `worker_limit`.
pub fn simulate_experiment(
    config: &ExperimentConfig,
    params: &BTreeMap<String, SimulatorParams>,
) -> Result<TrialArchive, RunError> {
    let missing: Vec<String> = config
        .fuzzers
        .iter()
        .filter(|f| !params.contains_key(&f.id))
        .map(|f| f.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(RunError::MissingParams(missing));
    }
    for (id, p) in params {
        p.validate()
            .map_err(|e| RunError::InvalidParams(format!("{id}: {e}")))?;
    }
    let benchmarks: Vec<_> = config.benchmarks.iter().collect();
    let plans = plan_trials(config, &benchmarks, std::path::Path::new(""));
    let records = run_pool(&plans, config.worker_limit as usize, |plan| {
        let kind = config.benchmark(&plan.benchmark_id).expect("planned from config").kind;
        simulate_trial(plan, config, kind, &params[&plan.fuzzer_id])
    });
    debug_assert!(plans.iter().zip(&records).all(|(p, r)| derive_seed(
        config.rng_seed,
        &r.fuzzer_id,
        &r.benchmark_id,
        r.trial_index
    ) == p.rng_stream_seed));
    Ok(TrialArchive::new(config.fingerprint(), records))
}

//! Python bindings: load configs and archives, simulate or run experiments,
//! analyze them and render reports, plus the standalone statistics.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::PathBuf;

use fuzzrank_core::analysis::{analyze as analyze_archive, AnalysisBundle, AnalysisOptions};
use fuzzrank_core::ingest::{read_archive, write_archive, ExperimentDir};
use fuzzrank_core::model::{parse_config, BenchmarkKind, ExperimentConfig, TrialArchive, Visibility};
use fuzzrank_core::report::{all_growth_curves, render_report, write_report};
use fuzzrank_core::runner::{parse_params, run_experiment, simulate_experiment, BenchmarkFilter};
use fuzzrank_core::stats::{self, Ranking};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

fn value_error(e: impl Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn kind(metric: &str) -> PyResult<BenchmarkKind> {
    match metric {
        "coverage" => Ok(BenchmarkKind::Coverage),
        "bug" => Ok(BenchmarkKind::Bug),
        other => Err(PyValueError::new_err(format!(
            "metric must be 'coverage' or 'bug', not {other:?}"
        ))),
    }
}

#[pyclass(name = "Config", module = "fuzzrank", frozen)]
pub struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_config(text).map(|inner| PyConfig { inner }).map_err(value_error)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let text =
            std::fs::read_to_string(&path).map_err(|e| PyOSError::new_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn trials(&self) -> u32 {
        self.inner.trials
    }

    #[getter]
    fn duration_s(&self) -> u64 {
        self.inner.duration_s
    }

    #[getter]
    fn snapshot_interval_s(&self) -> u64 {
        self.inner.snapshot_interval_s
    }

    #[getter]
    fn fuzzers(&self) -> Vec<String> {
        self.inner.fuzzer_ids()
    }

    /// `(id, kind, visibility)` for every benchmark.
    #[getter]
    fn benchmarks(&self) -> Vec<(String, &'static str, &'static str)> {
        self.inner
            .benchmarks
            .iter()
            .map(|b| (b.id.clone(), b.kind.as_str(), b.visibility.as_str()))
            .collect()
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn to_json(&self) -> String {
        self.inner.to_json_pretty()
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(name={:?}, fuzzers={}, benchmarks={}, trials={})",
            self.inner.name,
            self.inner.fuzzers.len(),
            self.inner.benchmarks.len(),
            self.inner.trials
        )
    }
}

/// One trial as `(fuzzer, benchmark, trial_index, [(t_s, lines)], first_crash_t_s)`.
type TrialTuple = (String, String, u32, Vec<(u64, u64)>, Option<u64>);

/// An absent trial as `(fuzzer, benchmark, trial_index, reason)`.
type Failure = (String, String, u32, String);

#[pyclass(name = "Archive", module = "fuzzrank", frozen)]
pub struct PyArchive {
    inner: TrialArchive,
}

#[pymethods]
impl PyArchive {
    /// Parses `snapshots.csv` and `crashes.csv` contents against `config`.
    #[staticmethod]
    fn from_csv(snapshots: &str, crashes: &str, config: &PyConfig) -> PyResult<Self> {
        read_archive(snapshots.as_bytes(), crashes.as_bytes(), &config.inner)
            .map(|inner| PyArchive { inner })
            .map_err(value_error)
    }

    /// `(snapshots_csv, crashes_csv)`.
    fn to_csv(&self) -> (String, String) {
        write_archive(&self.inner)
    }

    #[getter]
    fn config_fingerprint(&self) -> &str {
        &self.inner.config_fingerprint
    }

    #[pyo3(signature = (fuzzer=None, benchmark=None))]
    fn trials(&self, fuzzer: Option<&str>, benchmark: Option<&str>) -> Vec<TrialTuple> {
        self.inner
            .trials
            .iter()
            .filter(|t| fuzzer.is_none_or(|f| f == t.fuzzer_id) && benchmark.is_none_or(|b| b == t.benchmark_id))
            .map(|t| {
                (
                    t.fuzzer_id.clone(),
                    t.benchmark_id.clone(),
                    t.trial_index,
                    t.samples.iter().map(|s| (s.t_s, s.lines_covered)).collect(),
                    t.first_crash_t_s,
                )
            })
            .collect()
    }

    /// Writes config copy, fingerprint and archive into a new experiment directory.
    fn save(&self, experiment_dir: PathBuf, config: &PyConfig) -> PyResult<()> {
        if experiment_dir.exists() {
            return Err(PyOSError::new_err(format!(
                "{} already exists",
                experiment_dir.display()
            )));
        }
        ExperimentDir::new(experiment_dir)
            .write_experiment(&config.inner, &self.inner)
            .map_err(|e| PyOSError::new_err(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.inner.trials.len()
    }
}

#[pyclass(name = "Analysis", module = "fuzzrank", frozen)]
pub struct PyAnalysis {
    inner: AnalysisBundle,
}

fn ranking_rows(r: &Ranking) -> Vec<(String, f64, f64)> {
    let mut rows: Vec<_> = r.entries.iter().map(|e| (e.fuzzer.clone(), e.value, e.rank)).collect();
    rows.sort_by(|a, b| a.2.total_cmp(&b.2).then_with(|| a.0.cmp(&b.0)));
    rows
}

#[pymethods]
impl PyAnalysis {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        AnalysisBundle::from_json(text)
            .map(|inner| PyAnalysis { inner })
            .map_err(value_error)
    }

    /// The `analysis.json` document.
    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        py.import("json")?.call_method1("loads", (self.inner.to_json(),))
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    /// Aggregate score per fuzzer, or None when the family was not analyzed.
    fn aggregates(&self, metric: &str) -> PyResult<Option<BTreeMap<String, f64>>> {
        Ok(self
            .inner
            .family(kind(metric)?)
            .map(|f| f.aggregates.iter().map(|a| (a.fuzzer.clone(), a.score)).collect()))
    }

    /// `(fuzzer, value, rank)` sorted best first. `method` is
    /// `"average_rank"` or `"relative_to_best"`.
    fn ranking(&self, metric: &str, method: &str) -> PyResult<Option<Vec<(String, f64, f64)>>> {
        let Some(fam) = self.inner.family(kind(metric)?) else {
            return Ok(None);
        };
        match method {
            "average_rank" => Ok(Some(ranking_rows(&fam.average_rank))),
            "relative_to_best" => Ok(Some(ranking_rows(&fam.relative_to_best))),
            other => Err(PyValueError::new_err(format!("unknown ranking method {other:?}"))),
        }
    }

    fn score(&self, metric: &str, benchmark: &str, fuzzer: &str) -> PyResult<Option<f64>> {
        Ok(self
            .inner
            .family(kind(metric)?)
            .and_then(|f| f.scores.get(benchmark, fuzzer)))
    }

    /// The report tree as `{relative_path: contents}`.
    fn render_report(&self, config: &PyConfig, archive: &PyArchive) -> BTreeMap<String, String> {
        let growth = all_growth_curves(&config.inner, &archive.inner, &self.inner);
        render_report(&self.inner, &growth)
            .into_iter()
            .map(|(p, text)| (p.to_string_lossy().into_owned(), text))
            .collect()
    }

    /// Renders the report into `directory`, replacing anything there.
    fn write_report(&self, directory: PathBuf, config: &PyConfig, archive: &PyArchive) -> PyResult<()> {
        let growth = all_growth_curves(&config.inner, &archive.inner, &self.inner);
        write_report(&directory, &render_report(&self.inner, &growth)).map_err(|e| PyOSError::new_err(e.to_string()))
    }
}

/// Loads `(config, archive)` from an experiment directory.
#[pyfunction]
fn load_experiment(experiment_dir: PathBuf) -> PyResult<(PyConfig, PyArchive)> {
    let dir = ExperimentDir::new(experiment_dir);
    let config = PyConfig::load(dir.config())?;
    let archive = dir.read_archive(&config.inner).map_err(value_error)?;
    Ok((config, PyArchive { inner: archive }))
}

/// Simulates an archive. `params_json` maps fuzzer id to
/// `{max_coverage, rate, noise_sd, bug_hazard}`.
#[pyfunction]
fn simulate(py: Python<'_>, config: &PyConfig, params_json: &str) -> PyResult<PyArchive> {
    let params = parse_params(params_json).map_err(value_error)?;
    let cfg = &config.inner;
    py.detach(|| simulate_experiment(cfg, &params))
        .map(|inner| PyArchive { inner })
        .map_err(value_error)
}

/// Runs real fuzzer processes. Returns the archive and the absent trials.
#[pyfunction]
#[pyo3(signature = (config, experiment_dir, visibility="all"))]
fn run(
    py: Python<'_>,
    config: &PyConfig,
    experiment_dir: PathBuf,
    visibility: &str,
) -> PyResult<(PyArchive, Vec<Failure>)> {
    let filter = match visibility {
        "all" => BenchmarkFilter::default(),
        "public" => BenchmarkFilter::visibility(Visibility::Public),
        "private" => BenchmarkFilter::visibility(Visibility::Private),
        other => return Err(PyValueError::new_err(format!("unknown visibility {other:?}"))),
    };
    let cfg = &config.inner;
    let outcome = py
        .detach(|| run_experiment(cfg, &filter, &experiment_dir))
        .map_err(value_error)?;
    let failures = outcome
        .failures
        .into_iter()
        .map(|f| (f.fuzzer_id, f.benchmark_id, f.trial_index, f.reason))
        .collect();
    Ok((PyArchive { inner: outcome.archive }, failures))
}

#[pyfunction]
#[pyo3(signature = (config, archive, alpha=0.05, metric="all", raw_similarity=false))]
fn analyze(
    py: Python<'_>,
    config: &PyConfig,
    archive: &PyArchive,
    alpha: f64,
    metric: &str,
    raw_similarity: bool,
) -> PyResult<PyAnalysis> {
    let (coverage, bug) = match metric {
        "all" => (true, true),
        "coverage" => (true, false),
        "bug" => (false, true),
        other => return Err(PyValueError::new_err(format!("unknown metric {other:?}"))),
    };
    let options = AnalysisOptions {
        alpha,
        coverage,
        bug,
        raw_similarity,
    };
    let (cfg, arc) = (&config.inner, &archive.inner);
    py.detach(|| analyze_archive(cfg, arc, &options))
        .map(|inner| PyAnalysis { inner })
        .map_err(value_error)
}

#[pyfunction]
fn vargha_delaney_a12(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    stats::vargha_delaney_a12(&x, &y).map_err(value_error)
}

/// `(u, p, exact)` for the two-sided Mann-Whitney U test.
#[pyfunction]
fn mann_whitney_u(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64, bool)> {
    stats::mann_whitney_u(&x, &y)
        .map(|m| (m.u, m.p, m.exact))
        .map_err(value_error)
}

/// `(statistic, p)` for a benchmarks × fuzzers rank matrix.
#[pyfunction]
fn friedman_test(ranks: Vec<Vec<f64>>) -> PyResult<(f64, f64)> {
    stats::friedman_test(&ranks).map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (k, n_benchmarks, alpha=0.05))]
fn nemenyi_cd(k: usize, n_benchmarks: usize, alpha: f64) -> PyResult<f64> {
    stats::nemenyi_cd(k, n_benchmarks, alpha).map_err(value_error)
}

#[pyfunction]
fn cosine_similarity(u: Vec<f64>, v: Vec<f64>) -> PyResult<Option<f64>> {
    stats::cosine_similarity(&u, &v).map_err(value_error)
}

#[pyfunction]
fn median(values: Vec<f64>) -> PyResult<f64> {
    stats::median(&values).map_err(value_error)
}

#[pymodule]
fn fuzzrank(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyArchive>()?;
    m.add_class::<PyAnalysis>()?;
    m.add_function(wrap_pyfunction!(load_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(vargha_delaney_a12, m)?)?;
    m.add_function(wrap_pyfunction!(mann_whitney_u, m)?)?;
    m.add_function(wrap_pyfunction!(friedman_test, m)?)?;
    m.add_function(wrap_pyfunction!(nemenyi_cd, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(median, m)?)?;
    Ok(())
}

//! The `fuzzrank` command line: validate → run | simulate → analyze → report.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 the experiment
//! directory already exists.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::warn;

use crate::analysis::{analyze, AnalysisBundle, AnalysisOptions};
use crate::ingest::ExperimentDir;
use crate::model::{parse_config, split_benchmarks, BenchmarkKind, ExperimentConfig, Visibility};
use crate::report::{all_growth_curves, render_report, write_report};
use crate::runner::{attempt_count, parse_params, run_experiment, simulate_experiment, BenchmarkFilter, RunError};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_CONFLICT: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "fuzzrank",
    version,
    about = "Run, score and rank fuzzer benchmarking experiments"
)]
#[command(after_help = "Set FUZZRANK_LOG=error|warn|info|debug to control log verbosity (default: warn).")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VisibilityArg {
    Public,
    Private,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Coverage,
    Bug,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a config file and print a summary of its contents.
    Validate { config: PathBuf },
    /// Run every trial as a real fuzzer process.
    Run {
        config: PathBuf,
        /// Directory to create for the experiment; must not exist.
        experiment_dir: PathBuf,
        /// Only run benchmarks with this visibility.
        #[arg(long, value_enum, default_value_t = VisibilityArg::All)]
        visibility: VisibilityArg,
    },
    /// Generate a synthetic archive from per-fuzzer growth parameters.
    Simulate {
        config: PathBuf,
        /// JSON object mapping each fuzzer id to
        /// {max_coverage, rate, noise_sd, bug_hazard}.
        params: PathBuf,
        /// Directory to create for the experiment; must not exist.
        experiment_dir: PathBuf,
    },
    /// Score and compare the archive; writes analysis.json.
    Analyze {
        experiment_dir: PathBuf,
        /// Significance level for the Nemenyi critical difference (0.05 or 0.10).
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Which benchmark families to analyze.
        #[arg(long, value_enum, default_value_t = MetricArg::All)]
        metric: MetricArg,
        /// Also compute cosine similarity over raw median coverage.
        #[arg(long)]
        raw_similarity: bool,
    },
    /// Render report/ from analysis.json.
    Report { experiment_dir: PathBuf },
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn conflict(dir: &Path) -> Self {
        CliError {
            code: EXIT_CONFLICT,
            message: format!(
                "experiment directory {} already exists; refusing to overwrite",
                dir.display()
            ),
        }
    }
}

type CliResult = Result<(), CliError>;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = read(path)?;
    parse_config(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Config and archive of an existing experiment, with the fingerprint checked.
fn load_experiment(dir: &ExperimentDir) -> Result<(ExperimentConfig, crate::model::TrialArchive), CliError> {
    let config = load_config(&dir.config())?;
    let recorded = read(&dir.fingerprint())?;
    if recorded.trim() != config.fingerprint() {
        return Err(CliError::input(format!(
            "{} does not match the fingerprint of {}",
            dir.fingerprint().display(),
            dir.config().display()
        )));
    }
    let archive = dir.read_archive(&config).map_err(|e| CliError::input(e.to_string()))?;
    Ok((config, archive))
}

fn refuse_existing(dir: &Path) -> CliResult {
    if dir.exists() {
        Err(CliError::conflict(dir))
    } else {
        Ok(())
    }
}

fn run_error(e: RunError) -> CliError {
    match e {
        RunError::DirectoryExists(dir) => CliError::conflict(&dir),
        other => CliError::input(other.to_string()),
    }
}

pub fn cmd_validate(path: &Path, out: &mut dyn Write) -> CliResult {
    let config = load_config(path)?;
    let (public, private) = split_benchmarks(&config);
    let _ = writeln!(out, "config {:?} is valid", config.name);
    let _ = writeln!(out, "fuzzers: {}", config.fuzzers.len());
    let _ = writeln!(
        out,
        "benchmarks: {} ({} public / {} private)",
        config.benchmarks.len(),
        public.len(),
        private.len()
    );
    for kind in [BenchmarkKind::Coverage, BenchmarkKind::Bug] {
        let of_kind: Vec<_> = config.benchmarks_of_kind(kind).collect();
        let pubs = of_kind.iter().filter(|b| b.visibility == Visibility::Public).count();
        let _ = writeln!(
            out,
            "  {kind}: {} ({pubs} public / {} private)",
            of_kind.len(),
            of_kind.len() - pubs
        );
    }
    let _ = writeln!(
        out,
        "trials: {} per pair, {} attempts; duration {} s, snapshot every {} s, {} workers",
        config.trials,
        attempt_count(config.fuzzers.len(), config.benchmarks.len(), config.trials),
        config.duration_s,
        config.snapshot_interval_s,
        config.worker_limit
    );
    let _ = writeln!(out, "fingerprint: {}", config.fingerprint());
    Ok(())
}

pub fn cmd_run(config_path: &Path, experiment_dir: &Path, visibility: VisibilityArg, out: &mut dyn Write) -> CliResult {
    refuse_existing(experiment_dir)?;
    let config = load_config(config_path)?;
    let filter = match visibility {
        VisibilityArg::Public => BenchmarkFilter::visibility(Visibility::Public),
        VisibilityArg::Private => BenchmarkFilter::visibility(Visibility::Private),
        VisibilityArg::All => BenchmarkFilter::default(),
    };
    let outcome = run_experiment(&config, &filter, experiment_dir).map_err(run_error)?;
    let _ = writeln!(
        out,
        "{} of {} trials completed, {} absent; archive written to {}",
        outcome.archive.trials.len(),
        outcome.attempts,
        outcome.failures.len(),
        experiment_dir.display()
    );
    Ok(())
}

pub fn cmd_simulate(config_path: &Path, params_path: &Path, experiment_dir: &Path, out: &mut dyn Write) -> CliResult {
    refuse_existing(experiment_dir)?;
    let config = load_config(config_path)?;
    let params = parse_params(&read(params_path)?).map_err(run_error)?;
    let archive = simulate_experiment(&config, &params).map_err(run_error)?;
    ExperimentDir::new(experiment_dir)
        .write_experiment(&config, &archive)
        .map_err(|e| CliError::input(e.to_string()))?;
    let _ = writeln!(
        out,
        "simulated {} trials; archive written to {}",
        archive.trials.len(),
        experiment_dir.display()
    );
    Ok(())
}

pub fn cmd_analyze(experiment_dir: &Path, options: &AnalysisOptions, out: &mut dyn Write) -> CliResult {
    let dir = ExperimentDir::new(experiment_dir);
    let (config, archive) = load_experiment(&dir)?;
    let bundle = analyze(&config, &archive, options).map_err(|e| CliError::input(e.to_string()))?;
    for w in &bundle.warnings {
        warn!("{w}");
    }
    let path = dir.analysis();
    fs::write(&path, bundle.to_json()).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    let _ = writeln!(
        out,
        "analysis written to {} ({} warning(s))",
        path.display(),
        bundle.warnings.len()
    );
    Ok(())
}

pub fn cmd_report(experiment_dir: &Path, out: &mut dyn Write) -> CliResult {
    let dir = ExperimentDir::new(experiment_dir);
    let path = dir.analysis();
    if !path.exists() {
        return Err(CliError::input(format!(
            "{} not found; run `fuzzrank analyze {}` first",
            path.display(),
            experiment_dir.display()
        )));
    }
    let bundle =
        AnalysisBundle::from_json(&read(&path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let (config, archive) = load_experiment(&dir)?;
    if bundle.experiment.config_fingerprint != config.fingerprint() {
        return Err(CliError::input(format!(
            "{} was computed for a different config; rerun `fuzzrank analyze`",
            path.display()
        )));
    }
    let files = render_report(&bundle, &all_growth_curves(&config, &archive, &bundle));
    let report = dir.report();
    write_report(&report, &files).map_err(|e| CliError::input(format!("cannot write {}: {e}", report.display())))?;
    let _ = writeln!(out, "report written to {}", report.join("report.md").display());
    Ok(())
}

/// Executes a parsed invocation and returns its exit code. Diagnostics go to `err`.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let result = match &cli.command {
        Command::Validate { config } => cmd_validate(config, out),
        Command::Run {
            config,
            experiment_dir,
            visibility,
        } => cmd_run(config, experiment_dir, *visibility, out),
        Command::Simulate {
            config,
            params,
            experiment_dir,
        } => cmd_simulate(config, params, experiment_dir, out),
        Command::Analyze {
            experiment_dir,
            alpha,
            metric,
            raw_similarity,
        } => {
            let options = AnalysisOptions {
                alpha: *alpha,
                coverage: *metric != MetricArg::Bug,
                bug: *metric != MetricArg::Coverage,
                raw_similarity: *raw_similarity,
            };
            cmd_analyze(experiment_dir, &options, out)
        }
        Command::Report { experiment_dir } => cmd_report(experiment_dir, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

/// Logging from `FUZZRANK_LOG` (default `warn`).
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("FUZZRANK_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

//! CSV reader/writer for trial archives and the experiment directory layout.
//!
//! `snapshots.csv` holds one row per coverage sample and `crashes.csv` one row
//! per observed crash. Integers are plain base-10; rows are written sorted by
//! (fuzzer, benchmark, trial, time).

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use log::warn;

use crate::model::{BenchmarkKind, CoverageSample, ExperimentConfig, TrialArchive, TrialRecord};

pub const SNAPSHOT_HEADER: [&str; 5] = ["fuzzer", "benchmark", "trial", "time_s", "lines_covered"];
pub const CRASH_HEADER: [&str; 4] = ["fuzzer", "benchmark", "trial", "crash_time_s"];

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{file}: {source}")]
    Csv {
        file: &'static str,
        #[source]
        source: csv::Error,
    },
    #[error("{file}: expected header {expected:?}, found {found:?}")]
    Header {
        file: &'static str,
        expected: String,
        found: String,
    },
    #[error("{file} line {line}: {message}")]
    Row {
        file: &'static str,
        line: u64,
        message: String,
    },
    #[error("{label}: {message}")]
    Trial { label: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// One line of `snapshots.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotRow {
    pub fuzzer: String,
    pub benchmark: String,
    pub trial: u32,
    pub time_s: u64,
    pub lines_covered: u64,
}

/// One line of `crashes.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrashRow {
    pub fuzzer: String,
    pub benchmark: String,
    pub trial: u32,
    pub crash_time_s: u64,
}

fn parse_int(file: &'static str, line: u64, field: &str, text: &str) -> Result<u64, IngestError> {
    let well_formed =
        !text.is_empty() && text.bytes().all(|b| b.is_ascii_digit()) && (text == "0" || !text.starts_with('0'));
    let value = if well_formed { text.parse().ok() } else { None };
    value.ok_or_else(|| IngestError::Row {
        file,
        line,
        message: format!("{field} must be an unpadded base-10 integer, got {text:?}"),
    })
}

fn records<R: Read>(
    file: &'static str,
    stream: R,
    header: &[&str],
) -> Result<Vec<(u64, csv::StringRecord)>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(stream);
    let found = reader
        .headers()
        .map_err(|source| IngestError::Csv { file, source })?
        .clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(IngestError::Header {
            file,
            expected: header.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|source| IngestError::Csv { file, source })?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push((line, rec));
    }
    Ok(out)
}

type TrialKey = (String, String, u32);

fn check_ids(
    file: &'static str,
    line: u64,
    config: &ExperimentConfig,
    fuzzer: &str,
    benchmark: &str,
    trial: u64,
) -> Result<u32, IngestError> {
    let row_err = |message: String| IngestError::Row { file, line, message };
    if config.fuzzer(fuzzer).is_none() {
        return Err(row_err(format!("unknown fuzzer id {fuzzer:?}")));
    }
    if config.benchmark(benchmark).is_none() {
        return Err(row_err(format!("unknown benchmark id {benchmark:?}")));
    }
    if trial < 1 || trial > u64::from(config.trials) {
        return Err(row_err(format!("trial index {trial} outside 1..={}", config.trials)));
    }
    Ok(trial as u32)
}

/// Reads `snapshots.csv` and `crashes.csv` streams into a validated archive.
/// Row order in the input does not matter.
pub fn read_archive<S: Read, C: Read>(
    snapshots: S,
    crashes: C,
    config: &ExperimentConfig,
) -> Result<TrialArchive, IngestError> {
    const SNAP: &str = "snapshots.csv";
    const CRASH: &str = "crashes.csv";

    let mut grouped: BTreeMap<TrialKey, Vec<CoverageSample>> = BTreeMap::new();
    for (line, rec) in records(SNAP, snapshots, &SNAPSHOT_HEADER)? {
        let trial = parse_int(SNAP, line, "trial", &rec[2])?;
        let t_s = parse_int(SNAP, line, "time_s", &rec[3])?;
        let lines_covered = parse_int(SNAP, line, "lines_covered", &rec[4])?;
        let trial = check_ids(SNAP, line, config, &rec[0], &rec[1], trial)?;
        if t_s > config.duration_s {
            return Err(IngestError::Row {
                file: SNAP,
                line,
                message: format!("time_s {t_s} exceeds duration_s {}", config.duration_s),
            });
        }
        grouped
            .entry((rec[0].to_string(), rec[1].to_string(), trial))
            .or_default()
            .push(CoverageSample { t_s, lines_covered });
    }

    let mut first_crash: BTreeMap<TrialKey, u64> = BTreeMap::new();
    for (line, rec) in records(CRASH, crashes, &CRASH_HEADER)? {
        let trial = parse_int(CRASH, line, "trial", &rec[2])?;
        let crash_time_s = parse_int(CRASH, line, "crash_time_s", &rec[3])?;
        let trial = check_ids(CRASH, line, config, &rec[0], &rec[1], trial)?;
        if crash_time_s > config.duration_s || crash_time_s % config.snapshot_interval_s != 0 {
            return Err(IngestError::Row {
                file: CRASH,
                line,
                message: format!(
                    "crash_time_s {crash_time_s} is not a poll tick (multiple of {} up to {})",
                    config.snapshot_interval_s, config.duration_s
                ),
            });
        }
        let key = (rec[0].to_string(), rec[1].to_string(), trial);
        if !grouped.contains_key(&key) {
            return Err(IngestError::Row {
                file: CRASH,
                line,
                message: format!(
                    "crash row for fuzzer={} benchmark={} trial={} which has no snapshots",
                    key.0, key.1, key.2
                ),
            });
        }
        let slot = first_crash.entry(key).or_insert(crash_time_s);
        *slot = (*slot).min(crash_time_s);
    }

    let mut trials = Vec::with_capacity(grouped.len());
    for ((fuzzer_id, benchmark_id, trial_index), mut samples) in grouped {
        samples.sort_by_key(|s| s.t_s);
        let key = (fuzzer_id, benchmark_id, trial_index);
        let first_crash_t_s = first_crash.get(&key).copied();
        let (fuzzer_id, benchmark_id, trial_index) = key;
        let record = TrialRecord {
            fuzzer_id,
            benchmark_id,
            trial_index,
            samples,
            first_crash_t_s,
        };
        if let Some(dup) = record.samples.windows(2).find(|w| w[0].t_s == w[1].t_s) {
            return Err(IngestError::Trial {
                label: record.label(),
                message: format!("duplicate snapshot at time_s {}", dup[0].t_s),
            });
        }
        record.check_samples().map_err(|message| IngestError::Trial {
            label: record.label(),
            message,
        })?;
        if record.first_crash_t_s.is_some()
            && config.benchmark(&record.benchmark_id).map(|b| b.kind) == Some(BenchmarkKind::Coverage)
        {
            warn!(
                "{}: crash recorded on a coverage benchmark; kept but not scored",
                record.label()
            );
        }
        trials.push(record);
    }
    Ok(TrialArchive::new(config.fingerprint(), trials))
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is UTF-8")
}

/// Serializes an archive to (`snapshots.csv`, `crashes.csv`) contents.
pub fn write_archive(archive: &TrialArchive) -> (String, String) {
    let mut trials: Vec<&TrialRecord> = archive.trials.iter().collect();
    trials.sort_by(|a, b| {
        (&a.fuzzer_id, &a.benchmark_id, a.trial_index).cmp(&(&b.fuzzer_id, &b.benchmark_id, b.trial_index))
    });

    let mut snaps = writer();
    let mut crashes = writer();
    snaps.write_record(SNAPSHOT_HEADER).expect("in-memory write");
    crashes.write_record(CRASH_HEADER).expect("in-memory write");
    for t in trials {
        let trial = t.trial_index.to_string();
        let mut samples = t.samples.clone();
        samples.sort_by_key(|s| s.t_s);
        for s in samples {
            snaps
                .write_record([
                    t.fuzzer_id.as_str(),
                    t.benchmark_id.as_str(),
                    trial.as_str(),
                    &s.t_s.to_string(),
                    &s.lines_covered.to_string(),
                ])
                .expect("in-memory write");
        }
        if let Some(c) = t.first_crash_t_s {
            crashes
                .write_record([
                    t.fuzzer_id.as_str(),
                    t.benchmark_id.as_str(),
                    trial.as_str(),
                    &c.to_string(),
                ])
                .expect("in-memory write");
        }
    }
    (finish(snaps), finish(crashes))
}

/// Paths inside one experiment directory.
#[derive(Debug, Clone)]
pub struct ExperimentDir {
    root: PathBuf,
}

impl ExperimentDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ExperimentDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }
    pub fn fingerprint(&self) -> PathBuf {
        self.root.join("fingerprint.txt")
    }
    pub fn snapshots(&self) -> PathBuf {
        self.root.join("snapshots.csv")
    }
    pub fn crashes(&self) -> PathBuf {
        self.root.join("crashes.csv")
    }
    pub fn analysis(&self) -> PathBuf {
        self.root.join("analysis.json")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }
    pub fn work(&self) -> PathBuf {
        self.root.join("work")
    }

    /// Writes config copy, fingerprint and archive CSVs.
    pub fn write_experiment(&self, config: &ExperimentConfig, archive: &TrialArchive) -> Result<(), IngestError> {
        fs::create_dir_all(&self.root).map_err(|source| IngestError::Io {
            path: self.root.clone(),
            source,
        })?;
        let (snaps, crashes) = write_archive(archive);
        for (path, contents) in [
            (self.config(), config.to_json_pretty()),
            (self.fingerprint(), format!("{}\n", config.fingerprint())),
            (self.snapshots(), snaps),
            (self.crashes(), crashes),
        ] {
            fs::write(&path, contents).map_err(|source| IngestError::Io { path, source })?;
        }
        Ok(())
    }

    /// Reads the archive back with the config stored in the directory.
    pub fn read_archive(&self, config: &ExperimentConfig) -> Result<TrialArchive, IngestError> {
        let open = |path: PathBuf| fs::File::open(&path).map_err(|source| IngestError::Io { path, source });
        read_archive(open(self.snapshots())?, open(self.crashes())?, config)
    }
}

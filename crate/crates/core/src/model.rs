//! Domain types shared by every stage of the pipeline: the experiment
//! configuration, trial records and the trial archive, plus config
//! validation and command-template handling.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// Placeholders that may appear as `{NAME}` inside command templates.
pub const PLACEHOLDERS: [&str; 4] = ["CORPUS_DIR", "OUTPUT_DIR", "DURATION_S", "SEED_DIR"];

/// Default number of trials per (fuzzer, benchmark) pair.
pub const DEFAULT_TRIALS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkKind {
    Coverage,
    Bug,
}

impl BenchmarkKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkKind::Coverage => "coverage",
            BenchmarkKind::Bug => "bug",
        }
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    Private,
}

impl Visibility {
    pub fn as_str(self) -> &'static str {
        match self {
            Visibility::Public => "public",
            Visibility::Private => "private",
        }
    }
}

impl fmt::Display for Visibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzerSpec {
    pub id: String,
    pub run_command: Vec<String>,
    #[serde(default)]
    pub environment: BTreeMap<String, String>,
}

/// A benchmark target. Bug benchmarks contain exactly one reproducible bug,
/// so any crash on them counts as finding that bug.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub id: String,
    pub kind: BenchmarkKind,
    pub visibility: Visibility,
    pub target_command: Vec<String>,
    pub probe_command: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_corpus_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub trials: u32,
    pub duration_s: u64,
    pub snapshot_interval_s: u64,
    pub worker_limit: u32,
    pub rng_seed: u64,
    pub fuzzers: Vec<FuzzerSpec>,
    pub benchmarks: Vec<BenchmarkSpec>,
}

impl ExperimentConfig {
    pub fn fuzzer(&self, id: &str) -> Option<&FuzzerSpec> {
        self.fuzzers.iter().find(|f| f.id == id)
    }

    pub fn benchmark(&self, id: &str) -> Option<&BenchmarkSpec> {
        self.benchmarks.iter().find(|b| b.id == id)
    }

    pub fn fuzzer_ids(&self) -> Vec<String> {
        self.fuzzers.iter().map(|f| f.id.clone()).collect()
    }

    pub fn benchmarks_of_kind(&self, kind: BenchmarkKind) -> impl Iterator<Item = &BenchmarkSpec> {
        self.benchmarks.iter().filter(move |b| b.kind == kind)
    }

    /// Number of snapshot ticks in one trial: `snapshot_interval_s, 2·interval, …` up to the duration.
    pub fn tick_count(&self) -> u64 {
        self.duration_s / self.snapshot_interval_s
    }

    /// Canonical JSON serialization (pretty, trailing newline). Field order is fixed
    /// by the struct definitions and environments are ordered maps.
    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// SHA-256 (hex) of the compact canonical serialization.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CoverageSample {
    pub t_s: u64,
    pub lines_covered: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub fuzzer_id: String,
    pub benchmark_id: String,
    pub trial_index: u32,
    pub samples: Vec<CoverageSample>,
    pub first_crash_t_s: Option<u64>,
}

impl TrialRecord {
    /// Checks that sample times strictly increase and coverage never decreases.
    pub fn check_samples(&self) -> Result<(), String> {
        for pair in self.samples.windows(2) {
            if pair[1].t_s <= pair[0].t_s {
                return Err(format!(
                    "sample times not strictly increasing ({} then {})",
                    pair[0].t_s, pair[1].t_s
                ));
            }
            if pair[1].lines_covered < pair[0].lines_covered {
                return Err(format!(
                    "lines_covered decreases from {} to {} at t={}",
                    pair[0].lines_covered, pair[1].lines_covered, pair[1].t_s
                ));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!(
            "fuzzer={} benchmark={} trial={}",
            self.fuzzer_id, self.benchmark_id, self.trial_index
        )
    }
}

/// All trial records of one experiment, kept sorted by (fuzzer, benchmark, trial).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialArchive {
    pub config_fingerprint: String,
    pub trials: Vec<TrialRecord>,
}

impl TrialArchive {
    pub fn new(config_fingerprint: impl Into<String>, mut trials: Vec<TrialRecord>) -> Self {
        trials.sort_by(|a, b| {
            (&a.fuzzer_id, &a.benchmark_id, a.trial_index).cmp(&(&b.fuzzer_id, &b.benchmark_id, b.trial_index))
        });
        TrialArchive {
            config_fingerprint: config_fingerprint.into(),
            trials,
        }
    }

    pub fn trials_for<'a>(&'a self, fuzzer: &'a str, benchmark: &'a str) -> impl Iterator<Item = &'a TrialRecord> + 'a {
        self.trials
            .iter()
            .filter(move |t| t.fuzzer_id == fuzzer && t.benchmark_id == benchmark)
    }

    pub fn trials_on<'a>(&'a self, benchmark: &'a str) -> impl Iterator<Item = &'a TrialRecord> + 'a {
        self.trials.iter().filter(move |t| t.benchmark_id == benchmark)
    }

    pub fn benchmark_ids(&self) -> BTreeSet<&str> {
        self.trials.iter().map(|t| t.benchmark_id.as_str()).collect()
    }
}

/// One problem found while validating a config document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigErrors(pub Vec<Violation>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} config violation(s)", self.0.len())?;
        for v in &self.0 {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

/// Parses and validates a config file's text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let raw: Value = serde_json::from_str(text).map_err(|e| {
        ConfigErrors(vec![Violation {
            path: String::new(),
            message: format!("invalid JSON: {e}"),
        }])
    })?;
    validate_config(&raw)
}

/// Validates a raw config document, collecting every violation before returning.
pub fn validate_config(raw: &Value) -> Result<ExperimentConfig, ConfigErrors> {
    let mut v = Validator::default();
    let Some(obj) = raw.as_object() else {
        v.push("", "config must be a JSON object");
        return Err(ConfigErrors(v.errors));
    };
    v.check_keys(
        "",
        obj,
        &[
            "name",
            "trials",
            "duration_s",
            "snapshot_interval_s",
            "worker_limit",
            "rng_seed",
            "fuzzers",
            "benchmarks",
        ],
        &[],
    );

    let name = v.string(obj, "", "name");
    if matches!(&name, Some(n) if n.trim().is_empty()) {
        v.push("name", "must not be empty");
    }
    let trials = v.positive(obj, "", "trials");
    let duration_s = v.positive(obj, "", "duration_s");
    let snapshot_interval_s = v.positive(obj, "", "snapshot_interval_s");
    let worker_limit = v.positive(obj, "", "worker_limit");
    let rng_seed = v.unsigned(obj, "", "rng_seed");
    if let (Some(d), Some(i)) = (duration_s, snapshot_interval_s) {
        if i > d {
            v.push("snapshot_interval_s", format!("interval {i} exceeds duration_s {d}"));
        }
    }
    let trials = trials.and_then(|t| match u32::try_from(t) {
        Ok(t) => Some(t),
        Err(_) => {
            v.push("trials", "too large");
            None
        }
    });
    let worker_limit = worker_limit.and_then(|w| match u32::try_from(w) {
        Ok(w) => Some(w),
        Err(_) => {
            v.push("worker_limit", "too large");
            None
        }
    });

    let fuzzers = v.fuzzers(obj.get("fuzzers"));
    let benchmarks = v.benchmarks(obj.get("benchmarks"));

    if !v.errors.is_empty() {
        return Err(ConfigErrors(v.errors));
    }
    Ok(ExperimentConfig {
        name: name.expect("checked"),
        trials: trials.expect("checked"),
        duration_s: duration_s.expect("checked"),
        snapshot_interval_s: snapshot_interval_s.expect("checked"),
        worker_limit: worker_limit.expect("checked"),
        rng_seed: rng_seed.expect("checked"),
        fuzzers: fuzzers.expect("checked"),
        benchmarks: benchmarks.expect("checked"),
    })
}

#[derive(Default)]
struct Validator {
    errors: Vec<Violation>,
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

impl Validator {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    fn check_keys(&mut self, prefix: &str, obj: &Map<String, Value>, required: &[&str], optional: &[&str]) {
        for key in obj.keys() {
            if !required.contains(&key.as_str()) && !optional.contains(&key.as_str()) {
                self.push(join(prefix, key), "unknown key");
            }
        }
        for key in required {
            if !obj.contains_key(*key) {
                self.push(join(prefix, key), "missing required key");
            }
        }
    }

    fn string(&mut self, obj: &Map<String, Value>, prefix: &str, key: &str) -> Option<String> {
        match obj.get(key)? {
            Value::String(s) => Some(s.clone()),
            _ => {
                self.push(join(prefix, key), "must be a string");
                None
            }
        }
    }

    fn opt_string(&mut self, obj: &Map<String, Value>, prefix: &str, key: &str) -> Option<Option<String>> {
        match obj.get(key) {
            None | Some(Value::Null) => Some(None),
            Some(Value::String(s)) => Some(Some(s.clone())),
            Some(_) => {
                self.push(join(prefix, key), "must be a string");
                None
            }
        }
    }

    fn unsigned(&mut self, obj: &Map<String, Value>, prefix: &str, key: &str) -> Option<u64> {
        let value = obj.get(key)?;
        match value.as_u64() {
            Some(n) => Some(n),
            None => {
                self.push(join(prefix, key), "must be a non-negative integer");
                None
            }
        }
    }

    fn positive(&mut self, obj: &Map<String, Value>, prefix: &str, key: &str) -> Option<u64> {
        let n = self.unsigned(obj, prefix, key)?;
        if n == 0 {
            self.push(join(prefix, key), "must be at least 1");
            return None;
        }
        Some(n)
    }

    fn template(&mut self, obj: &Map<String, Value>, prefix: &str, key: &str) -> Option<Vec<String>> {
        let path = join(prefix, key);
        let items = match obj.get(key)? {
            Value::Array(items) => items,
            _ => {
                self.push(path, "must be a list of strings");
                return None;
            }
        };
        if items.is_empty() {
            self.push(path, "command template must not be empty");
            return None;
        }
        let mut out = Vec::with_capacity(items.len());
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            match item {
                Value::String(s) => {
                    if let Err(e) = check_template_arg(s) {
                        self.push(format!("{path}[{i}]"), e);
                        ok = false;
                    }
                    out.push(s.clone());
                }
                _ => {
                    self.push(format!("{path}[{i}]"), "must be a string");
                    ok = false;
                }
            }
        }
        if out[0].trim().is_empty() {
            self.push(format!("{path}[0]"), "program must not be empty");
            ok = false;
        }
        ok.then_some(out)
    }

    fn id(
        &mut self,
        obj: &Map<String, Value>,
        prefix: &str,
        allowed: fn(char) -> bool,
        pattern: &str,
    ) -> Option<String> {
        let id = self.string(obj, prefix, "id")?;
        if id.is_empty() || !id.chars().all(allowed) {
            self.push(join(prefix, "id"), format!("{id:?} does not match {pattern}"));
            return None;
        }
        Some(id)
    }

    fn array<'a>(&mut self, value: Option<&'a Value>, key: &str) -> Option<&'a Vec<Value>> {
        match value? {
            Value::Array(items) if items.is_empty() => {
                self.push(key, "must contain at least one entry");
                None
            }
            Value::Array(items) => Some(items),
            _ => {
                self.push(key, "must be a list");
                None
            }
        }
    }

    fn duplicates(&mut self, section: &str, ids: &[(usize, String)]) {
        let mut first: BTreeMap<&str, usize> = BTreeMap::new();
        for (pos, id) in ids {
            if let Some(prev) = first.get(id.as_str()) {
                self.push(
                    format!("{section}[{pos}].id"),
                    format!("duplicate id {id:?} (also at {section}[{prev}].id)"),
                );
            } else {
                first.insert(id, *pos);
            }
        }
    }

    fn fuzzers(&mut self, value: Option<&Value>) -> Option<Vec<FuzzerSpec>> {
        let items = self.array(value, "fuzzers")?;
        let mut out = Vec::new();
        let mut ids = Vec::new();
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            let prefix = format!("fuzzers[{i}]");
            let Some(obj) = item.as_object() else {
                self.push(prefix, "must be an object");
                ok = false;
                continue;
            };
            self.check_keys(&prefix, obj, &["id", "run_command"], &["environment"]);
            let id = self.id(obj, &prefix, is_fuzzer_id_char, "[a-z0-9_+-]+");
            let run_command = self.template(obj, &prefix, "run_command");
            let environment = self.environment(obj, &prefix);
            if let Some(id) = &id {
                ids.push((i, id.clone()));
            }
            match (id, run_command, environment) {
                (Some(id), Some(run_command), Some(environment)) => out.push(FuzzerSpec {
                    id,
                    run_command,
                    environment,
                }),
                _ => ok = false,
            }
        }
        let before = self.errors.len();
        self.duplicates("fuzzers", &ids);
        (ok && self.errors.len() == before).then_some(out)
    }

    fn environment(&mut self, obj: &Map<String, Value>, prefix: &str) -> Option<BTreeMap<String, String>> {
        let path = join(prefix, "environment");
        let map = match obj.get("environment") {
            None => return Some(BTreeMap::new()),
            Some(Value::Object(map)) => map,
            Some(_) => {
                self.push(path, "must be an object of string values");
                return None;
            }
        };
        let mut out = BTreeMap::new();
        let mut ok = true;
        for (k, v) in map {
            if PLACEHOLDERS.contains(&k.as_str()) {
                self.push(format!("{path}.{k}"), "reserved for placeholder binding");
                ok = false;
            }
            match v {
                Value::String(s) => {
                    out.insert(k.clone(), s.clone());
                }
                _ => {
                    self.push(format!("{path}.{k}"), "must be a string");
                    ok = false;
                }
            }
        }
        ok.then_some(out)
    }

    fn benchmarks(&mut self, value: Option<&Value>) -> Option<Vec<BenchmarkSpec>> {
        let items = self.array(value, "benchmarks")?;
        let mut out = Vec::new();
        let mut ids = Vec::new();
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            let prefix = format!("benchmarks[{i}]");
            let Some(obj) = item.as_object() else {
                self.push(prefix, "must be an object");
                ok = false;
                continue;
            };
            self.check_keys(
                &prefix,
                obj,
                &["id", "kind", "visibility", "target_command", "probe_command"],
                &["seed_corpus_dir", "notes"],
            );
            let id = self.id(obj, &prefix, is_benchmark_id_char, "[A-Za-z0-9_.+-]+");
            let kind = match self.string(obj, &prefix, "kind").as_deref() {
                Some("coverage") => Some(BenchmarkKind::Coverage),
                Some("bug") => Some(BenchmarkKind::Bug),
                Some(other) => {
                    self.push(
                        join(&prefix, "kind"),
                        format!("{other:?} is not \"coverage\" or \"bug\""),
                    );
                    None
                }
                None => None,
            };
            let visibility = match self.string(obj, &prefix, "visibility").as_deref() {
                Some("public") => Some(Visibility::Public),
                Some("private") => Some(Visibility::Private),
                Some(other) => {
                    self.push(
                        join(&prefix, "visibility"),
                        format!("{other:?} is not \"public\" or \"private\""),
                    );
                    None
                }
                None => None,
            };
            let target_command = self.template(obj, &prefix, "target_command");
            let probe_command = self.template(obj, &prefix, "probe_command");
            let seed_corpus_dir = self.opt_string(obj, &prefix, "seed_corpus_dir");
            let notes = self.opt_string(obj, &prefix, "notes");
            if let Some(id) = &id {
                ids.push((i, id.clone()));
            }
            match (
                id,
                kind,
                visibility,
                target_command,
                probe_command,
                seed_corpus_dir,
                notes,
            ) {
                (
                    Some(id),
                    Some(kind),
                    Some(visibility),
                    Some(target_command),
                    Some(probe_command),
                    Some(seed_corpus_dir),
                    Some(notes),
                ) => out.push(BenchmarkSpec {
                    id,
                    kind,
                    visibility,
                    target_command,
                    probe_command,
                    seed_corpus_dir,
                    notes,
                }),
                _ => ok = false,
            }
        }
        let before = self.errors.len();
        self.duplicates("benchmarks", &ids);
        (ok && self.errors.len() == before).then_some(out)
    }
}

fn is_fuzzer_id_char(c: char) -> bool {
    c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, '_' | '+' | '-')
}

fn is_benchmark_id_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '+' | '-')
}

#[derive(Debug)]
enum Segment<'a> {
    Literal(std::borrow::Cow<'a, str>),
    Placeholder(&'a str),
}

/// Splits one template argument into literal text and `{NAME}` placeholders.
/// `{{` and `}}` escape literal braces.
fn parse_template_arg(arg: &str) -> Result<Vec<Segment<'_>>, String> {
    let mut out = Vec::new();
    let mut literal = String::new();
    let bytes = arg.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' if bytes.get(i + 1) == Some(&b'{') => {
                literal.push('{');
                i += 2;
            }
            b'}' if bytes.get(i + 1) == Some(&b'}') => {
                literal.push('}');
                i += 2;
            }
            b'{' => {
                let Some(len) = arg[i + 1..].find('}') else {
                    return Err(format!("unclosed '{{' in {arg:?}"));
                };
                let name = &arg[i + 1..i + 1 + len];
                if !PLACEHOLDERS.contains(&name) {
                    return Err(format!(
                        "unknown placeholder {{{name}}} (allowed: {})",
                        PLACEHOLDERS.join(", ")
                    ));
                }
                if !literal.is_empty() {
                    out.push(Segment::Literal(std::mem::take(&mut literal).into()));
                }
                out.push(Segment::Placeholder(name));
                i += len + 2;
            }
            b'}' => return Err(format!("unmatched '}}' in {arg:?}")),
            _ => {
                let ch = arg[i..].chars().next().expect("in bounds");
                literal.push(ch);
                i += ch.len_utf8();
            }
        }
    }
    if !literal.is_empty() {
        out.push(Segment::Literal(literal.into()));
    }
    Ok(out)
}

/// Checks that a template argument only uses known placeholders and balanced braces.
pub fn check_template_arg(arg: &str) -> Result<(), String> {
    parse_template_arg(arg).map(|_| ())
}

/// Substitutes placeholder bindings into a validated command template.
pub fn render_template(template: &[String], bindings: &BTreeMap<&str, String>) -> Vec<String> {
    template
        .iter()
        .map(|arg| {
            let segments = parse_template_arg(arg).expect("template validated");
            segments
                .into_iter()
                .map(|s| match s {
                    Segment::Literal(text) => text.into_owned(),
                    Segment::Placeholder(name) => bindings.get(name).cloned().unwrap_or_default(),
                })
                .collect::<String>()
        })
        .collect()
}

/// Partitions benchmark ids by visibility into (public, private).
pub fn split_benchmarks(config: &ExperimentConfig) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut public = BTreeSet::new();
    let mut private = BTreeSet::new();
    for b in &config.benchmarks {
        match b.visibility {
            Visibility::Public => public.insert(b.id.clone()),
            Visibility::Private => private.insert(b.id.clone()),
        };
    }
    (public, private)
}

//! Run configuration documents: validation that reports every problem at
//! once, the canonical echo, and dataset resolution.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::automl::corpus::{meta_corpus, regime_corpus};
use crate::automl::ClassifierHyper;
use crate::csv_io::{parse_dataset_csv, CsvOptions};
use crate::evaluation::{EvalConfig, Strategy};
use crate::forecasters::MethodSpec;
use crate::metrics::Metric;
use crate::normalize::NormalizationKind;
use crate::split::SplitSpec;
use crate::synthetic::{generate_synthetic, SyntheticSpec};
use crate::Series;

/// One problem found in a configuration document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigIssue {
    pub path: String,
    pub expected: String,
    pub got: String,
}

impl ConfigIssue {
    fn new(path: impl Into<String>, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Self { path: path.into(), expected: expected.into(), got: got.into() }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: expected {}, got {}", self.path, self.expected, self.got)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("invalid configuration ({} problem(s)): {}", issues.len(), render_issues(issues))]
pub struct ConfigInvalid {
    pub issues: Vec<ConfigIssue>,
}

fn render_issues(issues: &[ConfigIssue]) -> String {
    issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusName {
    /// The 300-series pretraining corpus.
    Meta,
    /// The 60-series corpus used to check recommendations.
    Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    /// A CSV path or glob, relative to the configuration file.
    Path(String),
    File {
        path: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        frequency: Option<String>,
    },
    Synthetic {
        synthetic: Vec<SyntheticSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<String>,
    },
    Corpus {
        corpus: CorpusName,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub results_db: String,
    pub report: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { results_db: "results.db".into(), report: "report.md".into() }
    }
}

/// A validated run configuration in canonical form: methods expanded and
/// every default written out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub datasets: Vec<DatasetSource>,
    pub methods: Vec<MethodSpec>,
    pub eval: EvalConfig,
    pub output: OutputConfig,
    pub seed: u64,
    /// Worker threads; 0 means one per core.
    pub workers: usize,
}

/// Configuration of an offline pretraining run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub datasets: Vec<DatasetSource>,
    pub methods: Vec<MethodSpec>,
    pub eval: EvalConfig,
    pub hyper: ClassifierHyper,
    pub seed: u64,
    pub workers: usize,
}

fn describe(v: &Value) -> String {
    let text = match v {
        Value::Null => "null".to_string(),
        Value::String(s) => format!("{s:?}"),
        other => other.to_string(),
    };
    if text.chars().count() > 60 {
        format!("{}...", text.chars().take(57).collect::<String>())
    } else {
        text
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "a list",
        Value::Object(_) => "an object",
    }
}

/// Collects issues while walking a document.
struct Checker {
    issues: Vec<ConfigIssue>,
}

impl Checker {
    fn push(&mut self, path: impl Into<String>, expected: impl Into<String>, got: impl Into<String>) {
        self.issues.push(ConfigIssue::new(path, expected, got));
    }

    fn typed<T: DeserializeOwned>(&mut self, path: &str, v: &Value, expected: &str) -> Option<T> {
        match serde_json::from_value(v.clone()) {
            Ok(t) => Some(t),
            Err(e) => {
                let detail = e.to_string();
                let got = if detail.starts_with("invalid type") || detail.starts_with("invalid value") {
                    describe(v)
                } else {
                    format!("{} ({detail})", describe(v))
                };
                self.push(path, expected, got);
                None
            }
        }
    }

    fn unknown_keys(&mut self, prefix: &str, obj: &Map<String, Value>, allowed: &[&str]) {
        for key in obj.keys() {
            if !allowed.contains(&key.as_str()) {
                self.push(join(prefix, key), format!("one of {}", allowed.join(", ")), "an unknown key");
            }
        }
    }

    fn positive(&mut self, path: &str, v: &Value) -> Option<usize> {
        let n: usize = self.typed(path, v, "an integer >= 1")?;
        if n == 0 {
            self.push(path, "an integer >= 1", "0");
            return None;
        }
        Some(n)
    }

    fn datasets(&mut self, v: Option<&Value>) -> Vec<DatasetSource> {
        const EXPECTED: &str = "a non-empty list of dataset sources";
        let Some(v) = v else {
            self.push("datasets", EXPECTED, "nothing");
            return vec![];
        };
        let Some(items) = v.as_array() else {
            self.push("datasets", EXPECTED, type_name(v));
            return vec![];
        };
        if items.is_empty() {
            self.push("datasets", EXPECTED, "an empty list");
        }
        let mut out = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let path = format!("datasets[{i}]");
            if let Some(source) = self.dataset_source(&path, item) {
                out.push(source);
            }
        }
        out
    }

    fn dataset_source(&mut self, path: &str, item: &Value) -> Option<DatasetSource> {
        const EXPECTED: &str = "a path, {\"path\": ...}, {\"synthetic\": [...]} or {\"corpus\": \"meta\"|\"regime\"}";
        match item {
            Value::String(s) if !s.trim().is_empty() => Some(DatasetSource::Path(s.clone())),
            Value::Object(obj) if obj.contains_key("synthetic") => {
                self.unknown_keys(path, obj, &["synthetic", "domain"]);
                let specs_path = join(path, "synthetic");
                let raw = &obj["synthetic"];
                let Some(list) = raw.as_array().filter(|l| !l.is_empty()) else {
                    self.push(specs_path, "a non-empty list of synthetic specs", describe(raw));
                    return None;
                };
                let mut specs = Vec::new();
                for (j, s) in list.iter().enumerate() {
                    let p = format!("{specs_path}[{j}]");
                    let Some(spec) = self.typed::<SyntheticSpec>(&p, s, "a synthetic spec") else { continue };
                    match spec.validate() {
                        Ok(()) => specs.push(spec),
                        Err(e) => self.push(p, "a valid synthetic spec", e.to_string()),
                    }
                }
                let domain = self.optional_text(path, obj, "domain");
                (specs.len() == list.len()).then_some(DatasetSource::Synthetic { synthetic: specs, domain })
            }
            Value::Object(obj) if obj.contains_key("path") => {
                self.unknown_keys(path, obj, &["path", "id", "domain", "frequency"]);
                let file = match &obj["path"] {
                    Value::String(s) if !s.trim().is_empty() => Some(s.clone()),
                    other => {
                        self.push(join(path, "path"), "a non-empty string", describe(other));
                        None
                    }
                };
                let id = self.optional_text(path, obj, "id");
                let domain = self.optional_text(path, obj, "domain");
                let frequency = self.optional_text(path, obj, "frequency");
                file.map(|path| DatasetSource::File { path, id, domain, frequency })
            }
            Value::Object(obj) if obj.contains_key("corpus") => {
                self.unknown_keys(path, obj, &["corpus"]);
                let corpus = self.typed(&join(path, "corpus"), &obj["corpus"], "\"meta\" or \"regime\"")?;
                Some(DatasetSource::Corpus { corpus })
            }
            other => {
                self.push(path, EXPECTED, describe(other));
                None
            }
        }
    }

    fn optional_text(&mut self, prefix: &str, obj: &Map<String, Value>, key: &str) -> Option<String> {
        match obj.get(key)? {
            Value::String(s) if !s.is_empty() => Some(s.clone()),
            other => {
                self.push(join(prefix, key), "a non-empty string", describe(other));
                None
            }
        }
    }

    fn methods(&mut self, v: Option<&Value>) -> Vec<MethodSpec> {
        const EXPECTED: &str = "\"all\" or a non-empty list of methods";
        let Some(v) = v else {
            self.push("methods", EXPECTED, "nothing");
            return vec![];
        };
        let items = match v {
            Value::String(s) if s == "all" => return MethodSpec::all_builtin(),
            Value::Array(items) if !items.is_empty() => items,
            other => {
                self.push("methods", EXPECTED, describe(other));
                return vec![];
            }
        };
        let mut out: Vec<MethodSpec> = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let path = format!("methods[{i}]");
            let spec = match item {
                Value::String(s) => MethodSpec::new(s.clone()),
                Value::Object(_) => {
                    let Some(spec) = self.typed::<MethodSpec>(&path, item, "a method spec") else { continue };
                    spec
                }
                other => {
                    self.push(path, "a method id or method spec", describe(other));
                    continue;
                }
            };
            if let Err(e) = spec.validate() {
                self.push(path, "a known method with valid parameters", e.to_string());
            } else if out.contains(&spec) {
                self.push(path, "distinct methods", format!("a repeat of {}", spec.method_id));
            } else {
                out.push(spec);
            }
        }
        out
    }

    fn eval(&mut self, v: Option<&Value>) -> EvalConfig {
        let Some(v) = v else { return EvalConfig::default().canonical() };
        let Some(obj) = v.as_object() else {
            self.push("eval", "an object", type_name(v));
            return EvalConfig::default().canonical();
        };
        let before = self.issues.len();
        self.unknown_keys("eval", obj, &EVAL_KEYS);
        for (key, value) in obj {
            let path = join("eval", key);
            match key.as_str() {
                "horizon" | "lookback" | "mase_period" => {
                    self.positive(&path, value);
                }
                "stride" if !value.is_null() => {
                    self.positive(&path, value);
                }
                "strategy" => {
                    self.typed::<Strategy>(&path, value, "\"fixed\" or \"rolling\"");
                }
                "include_partial_final_window" => {
                    self.typed::<bool>(&path, value, "a boolean");
                }
                "normalization" => {
                    self.typed::<NormalizationKind>(&path, value, "\"zscore\" or \"none\"");
                }
                "seed" => {
                    self.typed::<u64>(&path, value, "a non-negative integer");
                }
                "metrics" => {
                    let expected = "a non-empty list of mae, mse, rmse, mape, smape, mase";
                    if let Some(m) = self.typed::<Vec<Metric>>(&path, value, expected) {
                        if m.is_empty() {
                            self.push(path, expected, "an empty list");
                        }
                    }
                }
                "split" => {
                    let expected = "{train_ratio, val_ratio, test_ratio} in (0, 1) summing to 1";
                    if let Some(s) = self.typed::<SplitSpec>(&path, value, expected) {
                        if let Err(e) = s.validate() {
                            self.push(path, expected, e.to_string());
                        }
                    }
                }
                _ => {}
            }
        }
        if self.issues.len() > before {
            return EvalConfig::default().canonical();
        }
        match serde_json::from_value::<EvalConfig>(v.clone()) {
            Ok(cfg) => cfg.canonical(),
            Err(e) => {
                self.push("eval", "an evaluation config", e.to_string());
                EvalConfig::default().canonical()
            }
        }
    }

    fn count(&mut self, path: &str, v: Option<&Value>) -> u64 {
        v.and_then(|v| self.typed::<u64>(path, v, "a non-negative integer")).unwrap_or(0)
    }

    fn hyper(&mut self, v: Option<&Value>) -> ClassifierHyper {
        let Some(v) = v else { return ClassifierHyper::default() };
        let expected = "{temperature > 0, l2 >= 0, lr > 0, epochs >= 1}";
        let Some(h) = self.typed::<ClassifierHyper>("hyper", v, expected) else { return ClassifierHyper::default() };
        if let Err(e) = h.validate() {
            self.push("hyper", expected, e.to_string());
        }
        h
    }
}

const EVAL_KEYS: [&str; 10] = [
    "strategy",
    "horizon",
    "lookback",
    "stride",
    "include_partial_final_window",
    "split",
    "normalization",
    "metrics",
    "seed",
    "mase_period",
];

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn document(text: &str) -> Result<Map<String, Value>, ConfigInvalid> {
    let fail = |expected: &str, got: String| ConfigInvalid { issues: vec![ConfigIssue::new("$", expected, got)] };
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(obj)) => Ok(obj),
        Ok(other) => Err(fail("a JSON object", type_name(&other).to_string())),
        Err(e) => Err(fail("valid JSON", e.to_string())),
    }
}

fn finish<T>(checker: Checker, value: T) -> Result<T, ConfigInvalid> {
    if checker.issues.is_empty() {
        Ok(value)
    } else {
        Err(ConfigInvalid { issues: checker.issues })
    }
}

/// Validates a run configuration, reporting every problem found.
pub fn validate_config(text: &str) -> Result<RunConfig, ConfigInvalid> {
    let obj = document(text)?;
    let mut c = Checker { issues: vec![] };
    c.unknown_keys("", &obj, &["datasets", "methods", "eval", "output", "seed", "workers"]);
    let datasets = c.datasets(obj.get("datasets"));
    let methods = c.methods(obj.get("methods"));
    let eval = c.eval(obj.get("eval"));
    let mut output = OutputConfig::default();
    if let Some(v) = obj.get("output") {
        match v.as_object() {
            Some(o) => {
                c.unknown_keys("output", o, &["results_db", "report"]);
                if let Some(db) = c.optional_text("output", o, "results_db") {
                    output.results_db = db;
                }
                if let Some(report) = c.optional_text("output", o, "report") {
                    output.report = report;
                }
            }
            None => c.push("output", "an object", type_name(v)),
        }
    }
    let seed = c.count("seed", obj.get("seed"));
    let workers = c.count("workers", obj.get("workers")) as usize;
    finish(c, RunConfig { datasets, methods, eval, output, seed, workers })
}

/// Validates a pretraining configuration.
pub fn validate_pretrain_config(text: &str) -> Result<PretrainConfig, ConfigInvalid> {
    let obj = document(text)?;
    let mut c = Checker { issues: vec![] };
    c.unknown_keys("", &obj, &["datasets", "methods", "eval", "hyper", "seed", "workers"]);
    let datasets = c.datasets(obj.get("datasets"));
    let methods = c.methods(obj.get("methods"));
    let eval = c.eval(obj.get("eval"));
    let hyper = c.hyper(obj.get("hyper"));
    let seed = c.count("seed", obj.get("seed"));
    let workers = c.count("workers", obj.get("workers")) as usize;
    finish(c, PretrainConfig { datasets, methods, eval, hyper, seed, workers })
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {message}")]
    Source { path: String, message: String },
    #[error("dataset id '{0}' appears more than once")]
    DuplicateId(String),
}

fn has_glob(p: &str) -> bool {
    p.contains(['*', '?', '['])
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
}

fn load_csv(path: &Path, id: Option<&str>, domain: Option<&str>, frequency: Option<&str>) -> Result<Series, LoadError> {
    let shown = path.display().to_string();
    let raw = std::fs::read(path).map_err(|e| LoadError::Source { path: shown.clone(), message: e.to_string() })?;
    let id = id.map(str::to_string).unwrap_or_else(|| stem(path));
    let mut series = parse_dataset_csv::<f64>(&raw, &id, &CsvOptions::default())
        .map_err(|e| LoadError::Source { path: shown, message: e.to_string() })?;
    if let Some(d) = domain {
        series = series.with_domain(d);
    }
    if let Some(f) = frequency {
        series = series.with_frequency(f);
    }
    Ok(series)
}

/// Reads or generates every dataset of `sources`. Relative paths are taken
/// from `base_dir`; synthetic series `k` (counted across all sources) uses
/// seed `seed + k` and id `synthetic-{k}`.
pub fn load_datasets(sources: &[DatasetSource], base_dir: &Path, seed: u64) -> Result<Vec<Series>, LoadError> {
    let mut out: Vec<Series> = Vec::new();
    let mut synthetic_index = 0u64;
    for source in sources {
        match source {
            DatasetSource::Path(p) if has_glob(p) => {
                let pattern = base_dir.join(p).to_string_lossy().into_owned();
                let bad = |message: String| LoadError::Source { path: p.clone(), message };
                let mut matches: Vec<PathBuf> =
                    glob::glob(&pattern).map_err(|e| bad(e.to_string()))?.filter_map(Result::ok).collect();
                matches.sort();
                if matches.is_empty() {
                    return Err(bad("no files match".into()));
                }
                for m in matches {
                    out.push(load_csv(&m, None, None, None)?);
                }
            }
            DatasetSource::Path(p) => out.push(load_csv(&base_dir.join(p), None, None, None)?),
            DatasetSource::File { path, id, domain, frequency } => {
                out.push(load_csv(&base_dir.join(path), id.as_deref(), domain.as_deref(), frequency.as_deref())?)
            }
            DatasetSource::Synthetic { synthetic, domain } => {
                for spec in synthetic {
                    let k = synthetic_index;
                    synthetic_index += 1;
                    let series: Series = generate_synthetic(spec, seed.wrapping_add(k))
                        .map_err(|e| LoadError::Source { path: "synthetic".into(), message: e.to_string() })?;
                    out.push(
                        series.with_id(format!("synthetic-{k}")).with_domain(domain.as_deref().unwrap_or("synthetic")),
                    );
                }
            }
            DatasetSource::Corpus { corpus: CorpusName::Meta } => out.extend(meta_corpus::<f64>()),
            DatasetSource::Corpus { corpus: CorpusName::Regime } => out.extend(regime_corpus::<f64>()),
        }
    }
    let mut seen = BTreeSet::new();
    for s in &out {
        if !seen.insert(s.id().to_string()) {
            return Err(LoadError::DuplicateId(s.id().to_string()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_echoes_defaults() {
        let cfg = validate_config(r#"{"datasets": [{"synthetic": [{"length": 240}]}], "methods": ["naive"]}"#).unwrap();
        assert_eq!(cfg.methods, vec![MethodSpec::new("naive")]);
        assert_eq!(cfg.eval, EvalConfig::default().canonical());
        assert_eq!(cfg.eval.stride, Some(24));
        assert_eq!(cfg.output, OutputConfig::default());
        let echoed = serde_json::to_string(&cfg).unwrap();
        assert_eq!(validate_config(&echoed).unwrap(), cfg);
    }

    #[test]
    fn empty_synthetic_spec_is_the_default() {
        let cfg = validate_config(r#"{"datasets": [{"synthetic": [{}]}], "methods": ["naive"]}"#).unwrap();
        assert_eq!(
            cfg.datasets,
            vec![DatasetSource::Synthetic { synthetic: vec![SyntheticSpec::default()], domain: None }]
        );
    }

    #[test]
    fn all_expands_to_builtins() {
        let cfg = validate_config(r#"{"datasets": ["a.csv"], "methods": "all"}"#).unwrap();
        assert_eq!(cfg.methods.len(), 10);
    }

    #[test]
    fn every_issue_is_reported() {
        let err = validate_config(
            r#"{"datasets": [], "methods": ["naive", "nope", 3], "eval": {"horizon": 0, "metrics": ["mae", "r2"],
                "lookback": -1, "colour": 1}, "seed": "x", "extra": true}"#,
        )
        .unwrap_err();
        let paths: Vec<&str> = err.issues.iter().map(|i| i.path.as_str()).collect();
        for p in [
            "datasets",
            "methods[1]",
            "methods[2]",
            "eval.horizon",
            "eval.metrics",
            "eval.lookback",
            "eval.colour",
            "seed",
            "extra",
        ] {
            assert!(paths.contains(&p), "missing {p} in {paths:?}");
        }
        let horizon = err.issues.iter().find(|i| i.path == "eval.horizon").unwrap();
        assert_eq!((horizon.expected.as_str(), horizon.got.as_str()), ("an integer >= 1", "0"));
    }

    #[test]
    fn not_json() {
        let err = validate_config("{").unwrap_err();
        assert_eq!(err.issues[0].path, "$");
    }

    #[test]
    fn synthetic_ids_and_seeds() {
        let sources = vec![DatasetSource::Synthetic {
            synthetic: vec![SyntheticSpec::default(), SyntheticSpec::default()],
            domain: None,
        }];
        let a = load_datasets(&sources, Path::new("."), 5).unwrap();
        assert_eq!(a[1].id(), "synthetic-1");
        assert_eq!(a[0].domain(), Some("synthetic"));
        let direct: Series = generate_synthetic(&SyntheticSpec::default(), 6).unwrap();
        assert_eq!(a[1].values(), direct.values());
    }

    #[test]
    fn missing_file_is_a_load_error() {
        let sources = vec![DatasetSource::Path("definitely/missing.csv".into())];
        assert!(matches!(load_datasets(&sources, Path::new("."), 0), Err(LoadError::Source { .. })));
        let globbed = vec![DatasetSource::Path("definitely/*.csv".into())];
        assert!(matches!(load_datasets(&globbed, Path::new("."), 0), Err(LoadError::Source { .. })));
    }
}

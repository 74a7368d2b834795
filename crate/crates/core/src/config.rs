//! Run configuration: JSON or a YAML subset (maps, lists, scalars).
//!
//! Relative paths are resolved against the config file's directory when it
//! is loaded. The resolved config is what gets echoed into `run_meta.json`,
//! and parsing that echo gives back the same value.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::{AdapterCommand, DEFAULT_TIMEOUT_SECS};
use crate::metrics::{Metric, Resolution};
use crate::mesh::Category;
use crate::physics::{FlowReference, OrientationCheck};
use crate::sampling::{SamplingMode, DEFAULT_SAMPLE_SIZE};
use crate::synth::{DEFAULT_IDW_K, DEFAULT_IDW_POWER};
use crate::uncertainty::BootstrapConfig;

pub const SEED_ENV: &str = "AEROBENCH_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// How many vertices to sample per design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleSize {
    Count(usize),
    All(AllPoints),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllPoints {
    All,
}

impl SampleSize {
    pub fn resolve(self, n_points: usize) -> usize {
        match self {
            SampleSize::Count(n) => n,
            SampleSize::All(_) => n_points,
        }
    }
}

impl Default for SampleSize {
    fn default() -> Self {
        SampleSize::Count(DEFAULT_SAMPLE_SIZE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitSpec {
    /// A split file or directory of id lists.
    Official { path: PathBuf },
    /// Zero-shot split built from manifest categories.
    CrossCategory {
        train: Vec<Category>,
        test: Vec<Category>,
        #[serde(default = "default_val_fraction")]
        val_fraction: f64,
        /// Round the training set down to a multiple of this many designs.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train_multiple: Option<usize>,
    },
}

fn default_val_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// External executable speaking the adapter protocol.
    Adapter {
        command: AdapterCommand,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params_m: Option<f64>,
    },
    /// Built-in inverse-distance-weighting baseline.
    Idw {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_power")]
        power: f64,
    },
    /// Returns the ground truth; a zero-error sanity model.
    Identity,
}

fn default_k() -> usize {
    DEFAULT_IDW_K
}

fn default_power() -> f64 {
    DEFAULT_IDW_POWER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ModelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileSettings {
    /// Profile adapters during `evaluate` as well. Timings are not
    /// reproducible, so this breaks byte-identical run trees.
    pub during_evaluate: bool,
    pub n_warmup: usize,
    pub n_timed: usize,
    /// Number of test designs cycled through while profiling.
    pub n_designs: usize,
}

impl Default for ProfileSettings {
    fn default() -> Self {
        ProfileSettings { during_evaluate: false, n_warmup: 10, n_timed: 100, n_designs: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCatRowSpec {
    pub train: Vec<Category>,
    pub test: Vec<Category>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub split: SplitSpec,
    #[serde(default = "default_field")]
    pub field: String,
    #[serde(default)]
    pub sample_n: SampleSize,
    #[serde(default)]
    pub sampling_mode: SamplingMode,
    #[serde(default)]
    pub master_seed: u64,
    /// Its `master_seed` is replaced by the run's master seed.
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default = "default_sort_key")]
    pub sort_key: Metric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowReference>,
    #[serde(default)]
    pub orientation_check: OrientationCheck,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default = "default_resolutions")]
    pub resolutions: Vec<Resolution>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    #[serde(default = "default_timeout")]
    pub adapter_timeout_s: u64,
    #[serde(default)]
    pub profile: ProfileSettings,
    #[serde(default)]
    pub crosscat: Vec<CrossCatRowSpec>,
    #[serde(default = "default_val_fraction")]
    pub crosscat_val_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crosscat_train_multiple: Option<usize>,
    #[serde(default = "default_true")]
    pub pca: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats_cache: Option<PathBuf>,
}

fn default_field() -> String {
    "p".into()
}

fn default_metrics() -> Vec<Metric> {
    Metric::LEADERBOARD.to_vec()
}

fn default_sort_key() -> Metric {
    Metric::RelL2
}

fn default_resolutions() -> Vec<Resolution> {
    vec![Resolution::Subsampled, Resolution::FullMesh]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_SECS
}

fn default_true() -> bool {
    true
}

/// Where the effective master seed came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOverride {
    pub variable: String,
    pub value: u64,
    pub config_value: u64,
}

impl RunConfig {
    /// Reads JSON (`.json`) or the YAML subset (anything else that is not
    /// valid JSON), then resolves relative paths.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::parse(&text, path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let parse_err = |msg: String| ConfigError::Parse { path: origin.to_path_buf(), msg };
        let is_json = origin.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        if is_json {
            serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))
        } else {
            check_yaml_subset(text).map_err(parse_err)?;
            serde_yaml::from_str(text).map_err(|e| parse_err(e.to_string()))
        }
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.manifest);
        fix(&mut self.output_dir);
        if let SplitSpec::Official { path } = &mut self.split {
            fix(path);
        }
        if let Some(p) = &mut self.stats_cache {
            fix(p);
        }
    }

    /// Applies `AEROBENCH_SEED` when set; returns the override record.
    pub fn apply_seed_env(&mut self) -> Result<Option<SeedOverride>, ConfigError> {
        match std::env::var(SEED_ENV) {
            Ok(v) => {
                let value: u64 = v
                    .trim()
                    .parse()
                    .map_err(|_| ConfigError::Invalid(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
                let record = SeedOverride { variable: SEED_ENV.into(), value, config_value: self.master_seed };
                self.master_seed = value;
                Ok(Some(record))
            }
            Err(_) => Ok(None),
        }
    }

    /// Checks everything that can be checked without touching the data.
    pub fn validate(&mut self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.bootstrap.master_seed = self.master_seed;
        self.bootstrap.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(f) = &self.flow {
            f.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if self.field.is_empty() {
            return bad("field name is empty".into());
        }
        if self.sample_n == SampleSize::Count(0) {
            return bad("sample_n must be positive".into());
        }
        if self.metrics.is_empty() {
            return bad("metrics list is empty".into());
        }
        if self.resolutions.is_empty() {
            return bad("resolutions list is empty".into());
        }
        if self.adapter_timeout_s == 0 {
            return bad("adapter_timeout_s must be positive".into());
        }
        if self.profile.n_timed < crate::adapter::MIN_TIMED_RUNS {
            return bad(format!("profile.n_timed must be at least {}", crate::adapter::MIN_TIMED_RUNS));
        }
        if self.profile.n_designs == 0 {
            return bad("profile.n_designs must be positive".into());
        }
        if !(0.0..1.0).contains(&self.crosscat_val_fraction) {
            return bad("crosscat_val_fraction must lie in [0, 1)".into());
        }
        if self.crosscat_train_multiple == Some(0) {
            return bad("crosscat_train_multiple must be positive".into());
        }
        if let SplitSpec::CrossCategory { train, test, val_fraction, train_multiple } = &self.split {
            check_categories(train, test)?;
            if !(0.0..1.0).contains(val_fraction) {
                return bad("split.val_fraction must lie in [0, 1)".into());
            }
            if *train_multiple == Some(0) {
                return bad("split.train_multiple must be positive".into());
            }
        }
        for row in &self.crosscat {
            check_categories(&row.train, &row.test)?;
        }
        let mut names = std::collections::BTreeSet::new();
        for m in &self.models {
            if m.name.is_empty() || !m.name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.+".contains(c)) {
                return bad(format!("model name {:?} must be non-empty and use only letters, digits, '_', '-', '.', '+'", m.name));
            }
            if !names.insert(m.name.as_str()) {
                return bad(format!("model name '{}' is used twice", m.name));
            }
            match &m.kind {
                ModelKind::Adapter { command, .. } if command.argv.is_empty() => {
                    return bad(format!("model '{}' has an empty adapter command", m.name))
                }
                ModelKind::Idw { k, power } if *k == 0 || !(*power > 0.0) => {
                    return bad(format!("model '{}': idw needs k ≥ 1 and power > 0", m.name))
                }
                _ => {}
            }
        }
        if let Some(id) = &self.run_id {
            if id.is_empty() || id.contains(['/', '\\']) || id.starts_with('.') {
                return bad(format!("run_id {id:?} is not a plain directory name"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serialises")
    }
}

fn check_categories(train: &[Category], test: &[Category]) -> Result<(), ConfigError> {
    if train.is_empty() || test.is_empty() {
        return Err(ConfigError::Invalid("cross-category rows need train and test categories".into()));
    }
    if let Some(c) = train.iter().find(|c| test.contains(c)) {
        return Err(ConfigError::Invalid(format!("category {c} is on both sides of a cross-category row")));
    }
    Ok(())
}

/// Rejects YAML features outside the supported subset.
fn check_yaml_subset(text: &str) -> Result<(), String> {
    for (i, line) in text.lines().enumerate() {
        let code = line.split(" #").next().unwrap_or("");
        let t = code.trim_start().trim_start_matches("- ");
        let value = t.split_once(": ").map_or(t, |(_, v)| v).trim_start();
        if value.starts_with('&') || value.starts_with('*') || value.starts_with('!') || t.starts_with("<<:") {
            return Err(format!("line {}: anchors, aliases, tags and merge keys are not supported", i + 1));
        }
    }
    Ok(())
}

//! Command workflows: ingest, stats, evaluate, profile, crosscat, synth.
//!
//! Every workflow starts from a validated [`RunConfig`] and writes under
//! `output_dir`. Evaluation artifacts go to `output_dir/<run_id>/`; scratch
//! files for adapters go to `output_dir/.work-<run_id>/` and are removed
//! after a clean run.

mod commands;
mod evaluate;

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adapter::AdapterError;
use crate::config::{ConfigError, RunConfig, SeedOverride, SplitSpec};
use crate::dataset::{self, DatasetError, Manifest, Split};
use crate::metrics::MetricError;
use crate::physics::PhysicsError;
use crate::report::ReportError;
use crate::sampling::SamplingError;
use crate::synth::SynthError;
use crate::uncertainty::UncertaintyError;

pub use commands::{
    all_crosscat_rows, crosscat, example_config, ingest, profile_model, stats, synth, CrossCatOutcome, IngestFailure, IngestOutcome,
    ProfileOutcome, StatsOutcome, SynthOutcome,
};
pub use evaluate::{evaluate, EvaluateOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ADAPTER: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl PipelineError {
    /// 2 for anything wrong with the config or the split definition,
    /// 4 for data and I/O problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Usage(_) => EXIT_CONFIG,
            PipelineError::Dataset(
                DatasetError::OverlappingSplits { .. }
                | DatasetError::UnknownDesignId(_)
                | DatasetError::DuplicateDesignId(_)
                | DatasetError::EmptyCategory(_)
                | DatasetError::OverlappingCategories(_)
                | DatasetError::EmptyTrainSplit,
            ) => EXIT_CONFIG,
            _ => EXIT_IO,
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

/// Split bookkeeping recorded in `run_meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitInfo {
    pub name: String,
    pub kind: &'static str,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    pub duplicates_removed: usize,
    pub train_hash: String,
}

/// A validated config bound to its manifest and split.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: RunConfig,
    pub seed_override: Option<SeedOverride>,
    pub manifest: Manifest,
    pub split: Split,
    pub split_info: SplitInfo,
    pub run_id: String,
}

impl RunContext {
    /// Loads the config file, applies `AEROBENCH_SEED`, validates, and
    /// resolves the manifest and split. Nothing is written.
    pub fn from_path(path: &Path) -> Result<Self, PipelineError> {
        let mut config = RunConfig::load(path)?;
        let seed_override = config.apply_seed_env()?;
        Self::new(config, seed_override)
    }

    pub fn new(mut config: RunConfig, seed_override: Option<SeedOverride>) -> Result<Self, PipelineError> {
        config.validate()?;
        let manifest = Manifest::load(&config.manifest)?;
        let (split, split_info) = match &config.split {
            SplitSpec::Official { path } => {
                let loaded = dataset::load_split(path, Some(&manifest))?;
                let s = loaded.split;
                let info = SplitInfo {
                    name: s.name.clone(),
                    kind: "official",
                    train_size: s.train.len(),
                    val_size: s.val.len(),
                    test_size: s.test.len(),
                    ratio: None,
                    duplicates_removed: loaded.duplicates_removed,
                    train_hash: s.train_hash(),
                };
                (s, info)
            }
            SplitSpec::CrossCategory { train, test, val_fraction, train_multiple } => {
                let cc = dataset::make_cross_category_split(&manifest, train, test, *val_fraction, *train_multiple, config.master_seed)?;
                let info = SplitInfo {
                    name: cc.split.name.clone(),
                    kind: "cross_category",
                    train_size: cc.train_size,
                    val_size: cc.val_size,
                    test_size: cc.test_size,
                    ratio: Some(cc.ratio),
                    duplicates_removed: 0,
                    train_hash: cc.split.train_hash(),
                };
                (cc.split, info)
            }
        };
        if split.test.is_empty() {
            return Err(ConfigError::Invalid(format!("split '{}' has no test designs", split.name)).into());
        }
        let run_id = config.run_id.clone().unwrap_or_else(|| run_id_for(&config));
        Ok(RunContext { config, seed_override, manifest, split, split_info, run_id })
    }

    pub fn run_dir(&self) -> PathBuf {
        self.config.output_dir.join(&self.run_id)
    }

    pub fn work_dir(&self) -> PathBuf {
        self.config.output_dir.join(format!(".work-{}", self.run_id))
    }
}

/// First 12 hex digits of the SHA-256 of the canonical config JSON.
pub fn run_id_for(config: &RunConfig) -> String {
    let mut c = config.clone();
    c.run_id = None;
    let canonical = serde_json::to_string(&c.to_json()).expect("config serialises");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("serialisable") + "\n";
    crate::report::write_text(path, &text)?;
    Ok(())
}

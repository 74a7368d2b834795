//! External model adapters: the APF exchange format, batch prediction
//! through a subprocess, and latency/memory profiling over a persistent
//! line protocol.

pub mod apf;
mod batch;
mod profile;

use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::PressureStats;

pub use apf::{read_apf, write_apf, ApfError, ApfFile, PredictionFile, Space};
pub use batch::{run_batch, BatchJob, BatchOptions, BatchResult, DesignFailure, FailureKind};
pub use profile::{profile, EfficiencyProfile, ProfileOptions, MIN_TIMED_RUNS};

pub const DEFAULT_TIMEOUT_SECS: u64 = 300;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("prediction for {0} is normalized but no training statistics were supplied")]
    MissingDenormalization(String),
    #[error("adapter crashed on {design_id}: {detail}")]
    AdapterCrash { design_id: String, detail: String },
    #[error("adapter timed out on {0}")]
    Timeout(String),
    #[error("adapter protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("invalid profiling setup: {0}")]
    InvalidConfig(String),
    #[error("could not start adapter: {0}")]
    Spawn(std::io::Error),
    #[error(transparent)]
    Apf(#[from] ApfError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An adapter invocation as an argv list. `{manifest}` and `{split}` in any
/// argument are replaced by the run's paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AdapterCommand {
    pub argv: Vec<String>,
}

impl AdapterCommand {
    pub fn new<I, S>(argv: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        AdapterCommand { argv: argv.into_iter().map(Into::into).collect() }
    }

    pub fn substitute(&self, manifest: &Path, split: &Path) -> Self {
        let m = manifest.display().to_string();
        let s = split.display().to_string();
        AdapterCommand { argv: self.argv.iter().map(|a| a.replace("{manifest}", &m).replace("{split}", &s)).collect() }
    }

    pub(crate) fn command(&self) -> Result<Command, AdapterError> {
        let (program, args) = self
            .argv
            .split_first()
            .ok_or_else(|| AdapterError::InvalidConfig("empty adapter command".into()))?;
        let mut cmd = Command::new(program);
        cmd.args(args);
        Ok(cmd)
    }
}

/// Brings predictions into kinematic pressure. Normalized values need the
/// train-split statistics; refusing here is what keeps a normalized file
/// from being scored as if it were physical.
pub fn to_physical(prediction: &PredictionFile, stats: Option<&PressureStats>) -> Result<Vec<f64>, AdapterError> {
    match (prediction.space, stats) {
        (Space::Physical, _) => Ok(prediction.values.clone()),
        (Space::Normalized, Some(s)) => Ok(s.denormalize(&prediction.values)),
        (Space::Normalized, None) => Err(AdapterError::MissingDenormalization(prediction.design_id.clone())),
    }
}

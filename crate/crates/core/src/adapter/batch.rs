use std::fmt;
use std::fs::File;
use std::path::PathBuf;
use std::process::Stdio;
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;
use wait_timeout::ChildExt;

use super::apf::{read_apf, PredictionFile};
use super::{AdapterCommand, DEFAULT_TIMEOUT_SECS};

/// One `predict` invocation.
#[derive(Debug, Clone)]
pub struct BatchJob {
    pub design_id: String,
    pub input: PathBuf,
    pub output: PathBuf,
    /// Number of prediction values the output must carry.
    pub expected_n: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct BatchOptions {
    pub timeout: Duration,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions { timeout: Duration::from_secs(DEFAULT_TIMEOUT_SECS) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureKind {
    Crash { exit_code: Option<i32>, stderr_tail: String },
    Timeout { seconds: f64 },
    Malformed { reason: String },
    Spawn { reason: String },
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureKind::Crash { exit_code: Some(c), .. } => write!(f, "adapter exited with status {c}"),
            FailureKind::Crash { exit_code: None, .. } => write!(f, "adapter killed by signal"),
            FailureKind::Timeout { seconds } => write!(f, "no answer within {seconds} s"),
            FailureKind::Malformed { reason } => write!(f, "malformed output: {reason}"),
            FailureKind::Spawn { reason } => write!(f, "could not start adapter: {reason}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignFailure {
    pub design_id: String,
    #[serde(flatten)]
    pub kind: FailureKind,
}

/// Predictions that came back intact plus everything that did not, both
/// sorted by design id.
#[derive(Debug, Clone, Default)]
pub struct BatchResult {
    pub predictions: Vec<PredictionFile>,
    pub failures: Vec<DesignFailure>,
}

/// Runs `<command> predict --input <in> --output <out>` once per job.
///
/// Jobs fan out over the current rayon pool. A failing design is recorded
/// and the rest carry on; nothing is imputed for it.
pub fn run_batch(command: &AdapterCommand, jobs: &[BatchJob], options: &BatchOptions) -> BatchResult {
    let outcomes: Vec<Result<PredictionFile, DesignFailure>> =
        jobs.par_iter().map(|job| run_one(command, job, options)).collect();
    let mut result = BatchResult::default();
    for o in outcomes {
        match o {
            Ok(p) => result.predictions.push(p),
            Err(f) => result.failures.push(f),
        }
    }
    result.predictions.sort_by(|a, b| a.design_id.cmp(&b.design_id));
    result.failures.sort_by(|a, b| a.design_id.cmp(&b.design_id));
    result
}

fn run_one(command: &AdapterCommand, job: &BatchJob, options: &BatchOptions) -> Result<PredictionFile, DesignFailure> {
    let fail = |kind| DesignFailure { design_id: job.design_id.clone(), kind };
    let spawn_err = |e: String| fail(FailureKind::Spawn { reason: e });

    let stderr_path = job.output.with_extension("stderr");
    let stderr = File::create(&stderr_path).map_err(|e| spawn_err(e.to_string()))?;
    let mut cmd = command.command().map_err(|e| spawn_err(e.to_string()))?;
    cmd.arg("predict")
        .arg("--input")
        .arg(&job.input)
        .arg("--output")
        .arg(&job.output)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(stderr);
    let mut child = cmd.spawn().map_err(|e| spawn_err(e.to_string()))?;

    let status = match child.wait_timeout(options.timeout) {
        Ok(Some(status)) => status,
        Ok(None) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(fail(FailureKind::Timeout { seconds: options.timeout.as_secs_f64() }));
        }
        Err(e) => return Err(spawn_err(e.to_string())),
    };
    if !status.success() {
        let text = std::fs::read_to_string(&stderr_path).unwrap_or_default();
        let tail: String = text.lines().rev().take(5).collect::<Vec<_>>().into_iter().rev().collect::<Vec<_>>().join("\n");
        return Err(fail(FailureKind::Crash { exit_code: status.code(), stderr_tail: tail }));
    }

    let malformed = |reason: String| fail(FailureKind::Malformed { reason });
    let file = read_apf(&job.output).map_err(|e| malformed(e.to_string()))?;
    let pred = file.prediction().map_err(|e| malformed(e.to_string()))?;
    if pred.design_id != job.design_id {
        return Err(malformed(format!("answered for design '{}'", pred.design_id)));
    }
    if pred.n() != job.expected_n {
        return Err(malformed(format!("{} predictions for {} points", pred.n(), job.expected_n)));
    }
    if let Some(i) = pred.values.iter().position(|v| !v.is_finite()) {
        return Err(malformed(format!("non-finite prediction at index {i}")));
    }
    Ok(pred)
}

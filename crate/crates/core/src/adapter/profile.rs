use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::{AdapterCommand, AdapterError, DEFAULT_TIMEOUT_SECS};
use crate::numeric::Moments;

pub const MIN_TIMED_RUNS: usize = 30;

#[derive(Debug, Clone, Copy)]
pub struct ProfileOptions {
    pub n_warmup: usize,
    pub n_timed: usize,
    pub timeout: Duration,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions { n_warmup: 10, n_timed: 100, timeout: Duration::from_secs(DEFAULT_TIMEOUT_SECS) }
    }
}

/// Batch-1 inference cost of one adapter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyProfile {
    pub mean_latency_ms: f64,
    /// Sample standard deviation over the timed runs.
    pub latency_std_ms: f64,
    /// Always `1000 / mean_latency_ms`.
    pub throughput_sps: f64,
    /// 10⁹ bytes.
    pub peak_memory_gb: f64,
    /// "adapter", "os_vmhwm" or "unavailable".
    pub peak_memory_source: String,
    pub memory_semantics: String,
    pub n_warmup: usize,
    pub n_timed: usize,
    pub batch_size: u32,
}

impl EfficiencyProfile {
    pub fn from_latencies(latencies_ms: &[f64], n_warmup: usize, peak_bytes: u64, source: &str, semantics: &str) -> Self {
        let m = Moments::from_slice(latencies_ms);
        let n = latencies_ms.len() as f64;
        let std = if latencies_ms.len() > 1 { (m.population_variance() * n / (n - 1.0)).sqrt() } else { 0.0 };
        EfficiencyProfile {
            mean_latency_ms: m.mean,
            latency_std_ms: std,
            throughput_sps: 1000.0 / m.mean,
            peak_memory_gb: peak_bytes as f64 / 1e9,
            peak_memory_source: source.to_string(),
            memory_semantics: semantics.to_string(),
            n_warmup,
            n_timed: latencies_ms.len(),
            batch_size: 1,
        }
    }
}

/// Times an adapter in persistent mode (`<command> serve`).
///
/// Each request is `RUN <in> <out>`; the clock starts just before the line
/// is written and stops when the `OK <bytes> [semantics]` answer arrives, so
/// process start-up and input file writing are excluded. Inputs are cycled
/// in order; outputs go to `work_dir` and are not scored.
pub fn profile(
    command: &AdapterCommand,
    inputs: &[PathBuf],
    work_dir: &Path,
    options: &ProfileOptions,
) -> Result<EfficiencyProfile, AdapterError> {
    if inputs.is_empty() {
        return Err(AdapterError::InvalidConfig("no sample files to profile with".into()));
    }
    if options.n_timed < MIN_TIMED_RUNS {
        return Err(AdapterError::InvalidConfig(format!(
            "n_timed = {} is below the minimum of {MIN_TIMED_RUNS}",
            options.n_timed
        )));
    }
    std::fs::create_dir_all(work_dir)?;

    let mut cmd = command.command()?;
    cmd.arg("serve").stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::null());
    let mut child = cmd.spawn().map_err(AdapterError::Spawn)?;
    let result = drive(&mut child, inputs, work_dir, options);
    if result.is_err() {
        let _ = child.kill();
    }
    if let Ok(None) = child.wait_timeout(Duration::from_secs(5)) {
        let _ = child.kill();
    }
    let _ = child.wait();
    result
}

fn drive(child: &mut Child, inputs: &[PathBuf], work_dir: &Path, options: &ProfileOptions) -> Result<EfficiencyProfile, AdapterError> {
    let mut stdin = child.stdin.take().expect("piped stdin");
    let stdout = child.stdout.take().expect("piped stdout");
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            if tx.send(line).is_err() {
                break;
            }
        }
    });

    let mut latencies = Vec::with_capacity(options.n_timed);
    let mut peak_reported = 0u64;
    let mut semantics = String::from("adapter_reported");
    for call in 0..options.n_warmup + options.n_timed {
        let input = &inputs[call % inputs.len()];
        let output = work_dir.join(format!("profile_{}.apf", call % inputs.len()));
        let line = format!("RUN {} {}\n", input.display(), output.display());

        let start = Instant::now();
        stdin.write_all(line.as_bytes())?;
        stdin.flush()?;
        let answer = match rx.recv_timeout(options.timeout) {
            Ok(Ok(a)) => a,
            Ok(Err(e)) => return Err(AdapterError::Io(e)),
            Err(mpsc::RecvTimeoutError::Timeout) => return Err(AdapterError::Timeout(input.display().to_string())),
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                return Err(AdapterError::ProtocolViolation("adapter closed its output".into()))
            }
        };
        let elapsed = start.elapsed();

        let (bytes, sem) = parse_answer(&answer)?;
        peak_reported = peak_reported.max(bytes);
        if let Some(s) = sem {
            semantics = s;
        }
        if call >= options.n_warmup {
            latencies.push(elapsed.as_secs_f64() * 1e3);
        }
    }

    let (peak, source) = if peak_reported > 0 {
        (peak_reported, "adapter")
    } else {
        semantics = "resident_set_high_water_mark".into();
        match vm_hwm_bytes(child.id()) {
            Some(b) => (b, "os_vmhwm"),
            None => (0, "unavailable"),
        }
    };
    let _ = stdin.write_all(b"QUIT\n");
    let _ = stdin.flush();
    Ok(EfficiencyProfile::from_latencies(&latencies, options.n_warmup, peak, source, &semantics))
}

fn parse_answer(line: &str) -> Result<(u64, Option<String>), AdapterError> {
    let mut parts = line.trim().splitn(3, ' ');
    match parts.next() {
        Some("OK") => {
            let bytes = parts
                .next()
                .and_then(|b| b.parse::<u64>().ok())
                .ok_or_else(|| AdapterError::ProtocolViolation(format!("bad OK line: {line:?}")))?;
            Ok((bytes, parts.next().map(|s| s.trim().to_string()).filter(|s| !s.is_empty())))
        }
        Some("ERR") => Err(AdapterError::ProtocolViolation(format!(
            "adapter reported an error: {}",
            line.trim().trim_start_matches("ERR").trim()
        ))),
        _ => Err(AdapterError::ProtocolViolation(format!("unexpected answer: {line:?}"))),
    }
}

/// Peak resident set of a live process, from `/proc/<pid>/status`.
fn vm_hwm_bytes(pid: u32) -> Option<u64> {
    let status = std::fs::read_to_string(format!("/proc/{pid}/status")).ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

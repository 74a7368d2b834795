//! Reference adapter speaking the harness's prediction protocol.
//!
//! One-shot: `aerobench-adapter [MODE OPTIONS] predict --input IN --output OUT`.
//! Persistent: `aerobench-adapter [MODE OPTIONS] serve`, then
//! `RUN <in> <out>` lines on stdin, answered by `OK <peak bytes> <semantics>`,
//! until `QUIT`.
//!
//! Besides real baselines (identity, IDW) it has fault and timing modes used
//! to test the harness: constant offsets, sleeps, slow first calls, crashes
//! on one design and short outputs.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use aerobench::adapter::{apf, read_apf, write_apf, ApfFile, Space};
use aerobench::dataset::{self, Manifest, PressureStats};
use aerobench::sampling::sample_vertices;
use aerobench::synth::{IdwModel, DEFAULT_IDW_K, DEFAULT_IDW_POWER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Echo the input truth.
    Identity,
    /// Truth plus --value.
    Offset,
    /// Inverse-distance weighting over the split's training designs.
    Idw,
    /// Identity after sleeping --ms milliseconds.
    Sleep,
    /// Identity; the first --slow-calls calls sleep --slow-ms, later ones --ms.
    Staged,
    /// Identity, but exit 1 on --fail-design.
    FailOn,
    /// Write one value fewer than requested.
    Malformed,
}

#[derive(Parser, Debug)]
#[command(name = "aerobench-adapter")]
struct Args {
    #[arg(long, value_enum, default_value = "identity")]
    mode: Mode,
    /// Offset added in offset mode, m²/s².
    #[arg(long, default_value_t = 0.0)]
    value: f64,
    /// Sleep per call in sleep and staged modes.
    #[arg(long, default_value_t = 0)]
    ms: u64,
    #[arg(long, default_value_t = 0)]
    slow_calls: usize,
    #[arg(long, default_value_t = 0)]
    slow_ms: u64,
    #[arg(long)]
    fail_design: Option<String>,
    /// Dataset manifest (idw mode).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Split whose training designs form the IDW pool.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value = "p")]
    field: String,
    /// Training points per design: a count or "all".
    #[arg(long, default_value = "10000")]
    n: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_IDW_K)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_IDW_POWER)]
    power: f64,
    /// Answer in normalized space using train-split statistics.
    #[arg(long)]
    normalized: bool,
    /// Peak-memory figure to report in serve mode; 0 asks the harness to
    /// measure resident memory itself.
    #[arg(long, default_value_t = 0)]
    report_bytes: u64,
    #[arg(long, default_value = "rss")]
    semantics: String,
    /// Parameter count written into every prediction.
    #[arg(long)]
    param_count: Option<f64>,
    #[command(subcommand)]
    action: Action,
}

#[derive(Subcommand, Debug)]
enum Action {
    Predict {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    Serve,
}

struct Trained {
    model: IdwModel,
    stats: Option<PressureStats>,
}

struct Adapter {
    args: Args,
    calls: usize,
    trained: OnceLock<Result<Trained, String>>,
}

impl Adapter {
    fn train(&self) -> Result<&Trained, String> {
        self.trained
            .get_or_init(|| {
                let a = &self.args;
                let manifest_path = a.manifest.as_ref().ok_or("idw mode needs --manifest")?;
                let split_path = a.split.as_ref().ok_or("idw mode needs --split")?;
                let manifest = Manifest::load(manifest_path).map_err(|e| e.to_string())?;
                let split = dataset::load_split(split_path, Some(&manifest)).map_err(|e| e.to_string())?.split;
                let mut ids = split.train.clone();
                ids.sort();
                let samples = ids
                    .iter()
                    .map(|id| {
                        let mesh = manifest.load_mesh(id).map_err(|e| e.to_string())?;
                        let n = if a.n == "all" {
                            mesh.n_points()
                        } else {
                            a.n.parse().map_err(|_| format!("--n {:?} is neither a count nor \"all\"", a.n))?
                        };
                        sample_vertices(&mesh, &a.field, n, a.seed).map_err(|e| e.to_string())
                    })
                    .collect::<Result<Vec<_>, String>>()?;
                let model = IdwModel::fit(&samples, a.k, a.power).map_err(|e| e.to_string())?;
                let stats = if a.normalized {
                    Some(dataset::compute_pressure_stats(&manifest, &split.train, &a.field).map_err(|e| e.to_string())?)
                } else {
                    None
                };
                Ok(Trained { model, stats })
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    fn predict(&mut self, input: &Path, output: &Path) -> Result<(), String> {
        self.calls += 1;
        let a = &self.args;
        let delay = match a.mode {
            Mode::Sleep => a.ms,
            Mode::Staged if self.calls <= a.slow_calls => a.slow_ms,
            Mode::Staged => a.ms,
            _ => 0,
        };
        if delay > 0 {
            std::thread::sleep(Duration::from_millis(delay));
        }
        let file = read_apf(input).map_err(|e| e.to_string())?;
        if a.mode == Mode::FailOn && a.fail_design.as_deref() == Some(file.design_id.as_str()) {
            return Err(format!("refusing design {}", file.design_id));
        }
        let truth = || file.require(apf::TRUTH).map(<[f64]>::to_vec).map_err(|e| e.to_string());
        let mut space = Space::Physical;
        let values = match a.mode {
            Mode::Offset => truth()?.into_iter().map(|v| v + a.value).collect(),
            Mode::Idw => {
                let t = self.train()?;
                let pred = t.model.predict(&file.points().map_err(|e| e.to_string())?);
                match &t.stats {
                    Some(s) => {
                        space = Space::Normalized;
                        s.normalize(&pred).map_err(|e| e.to_string())?
                    }
                    None => pred,
                }
            }
            Mode::Malformed => {
                let mut v = truth()?;
                v.pop();
                v
            }
            _ => truth()?,
        };
        let mut out = ApfFile::new(file.design_id.clone(), space, file.sample_seed);
        out.set(apf::PREDICTION, values);
        if let Some(c) = a.param_count {
            out.set(apf::PARAM_COUNT, vec![c]);
        }
        write_apf(output, &out).map_err(|e| e.to_string())
    }
}

fn serve(adapter: &mut Adapter) -> Result<(), String> {
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line.map_err(|e| e.to_string())?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        let reply = match parts.as_slice() {
            ["QUIT"] => break,
            ["RUN", input, output] => match adapter.predict(Path::new(input), Path::new(output)) {
                Ok(()) => format!("OK {} {}", adapter.args.report_bytes, adapter.args.semantics),
                Err(e) => format!("ERR {e}"),
            },
            _ => format!("ERR unknown command {line:?}"),
        };
        writeln!(stdout, "{reply}").and_then(|_| stdout.flush()).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() {
    let args = Args::parse();
    let action = match &args.action {
        Action::Predict { input, output } => Some((input.clone(), output.clone())),
        Action::Serve => None,
    };
    let mut adapter = Adapter { args, calls: 0, trained: OnceLock::new() };
    let result = match action {
        Some((input, output)) => adapter.predict(&input, &output),
        None => serve(&mut adapter),
    };
    if let Err(e) = result {
        eprintln!("aerobench-adapter: {e}");
        std::process::exit(1);
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aerobench::pipeline::{self, PipelineError, RunContext};
use aerobench::report::HARNESS_VERSION;
use aerobench::synth::SyntheticSpec;

/// Evaluation harness for surface-pressure surrogate models.
///
/// Exit codes: 0 success, 2 config or split error, 3 some adapter
/// predictions failed (the run still completed), 4 I/O or data error.
/// Set AEROBENCH_SEED to override the config's master seed; the override is
/// recorded in run_meta.json.
#[derive(Parser, Debug)]
#[command(name = "aerobench", version = HARNESS_VERSION)]
struct Cli {
    /// Worker threads for parallel stages (default: logical cores). Results
    /// do not depend on this value.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse every manifest mesh, write an ABM1 cache and geometry statistics.
    Ingest {
        /// Run config (JSON or YAML subset).
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute train-only pressure statistics and write the stats cache.
    Stats {
        #[arg(long)]
        config: PathBuf,
    },
    /// Full evaluation run; writes <output_dir>/<run_id>/.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Latency, throughput and peak memory of one adapter model.
    Profile {
        #[arg(long)]
        config: PathBuf,
        /// Name of an adapter model from the config.
        #[arg(long)]
        model: String,
    },
    /// Cross-category (zero-shot) matrix over the config's crosscat rows.
    Crosscat {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a synthetic dataset with an analytic pressure field, plus a
    /// ready-to-run config (aerobench.json) in the output directory.
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Generator spec as JSON; unspecified fields take defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Override the number of designs per category (F, E and N alike).
        #[arg(long)]
        per_category: Option<usize>,
    },
    /// Print the harness version.
    Version,
}

fn context(config: &Path) -> Result<RunContext, PipelineError> {
    RunContext::from_path(config)
}

fn run(cli: Cli) -> Result<i32, PipelineError> {
    match cli.command {
        Command::Ingest { config } => {
            let mut cfg = aerobench::config::RunConfig::load(&config)?;
            cfg.apply_seed_env()?;
            cfg.validate()?;
            let out = pipeline::ingest(&cfg)?;
            println!("cached {} meshes; manifest {}", out.n_cached, out.cache_manifest.display());
            println!("geometry stats: {}", out.stats_csv.display());
            for f in &out.failures {
                eprintln!("failed: {}: {}", f.design_id, f.error);
            }
            Ok(out.exit_code())
        }
        Command::Stats { config } => {
            let ctx = context(&config)?;
            let out = pipeline::stats(&ctx)?;
            let s = &out.stats;
            println!(
                "mean {:.6} m²/s², std {:.6} m²/s² over {} points from {} training designs",
                s.mean, s.std, s.n_points_total, s.n_designs
            );
            println!("written to {}", out.path.display());
            Ok(pipeline::EXIT_OK)
        }
        Command::Evaluate { config } => {
            let ctx = context(&config)?;
            let out = pipeline::evaluate(&ctx)?;
            for row in &out.leaderboard.rows {
                let cells: Vec<String> = row.cells.iter().map(|c| format!("{} {}", c.metric, c.display)).collect();
                println!("{:>2}. {:<20} {}", row.rank, row.name, cells.join(", "));
            }
            for (model, fails) in &out.failures {
                for f in fails {
                    eprintln!("{model}: {} failed: {}", f.design_id, f.kind);
                }
            }
            println!("run {} written to {}", out.run_id, out.run_dir.display());
            Ok(out.exit_code())
        }
        Command::Profile { config, model } => {
            let ctx = context(&config)?;
            let out = pipeline::profile_model(&ctx, &model)?;
            let p = &out.profile;
            println!(
                "{model}: latency {:.3} ± {:.3} ms, throughput {:.2} sps, peak memory {:.3} GB ({}), {} timed runs after {} warmup",
                p.mean_latency_ms, p.latency_std_ms, p.throughput_sps, p.peak_memory_gb, p.peak_memory_source, p.n_timed, p.n_warmup
            );
            println!("written to {}", out.path.display());
            Ok(pipeline::EXIT_OK)
        }
        Command::Crosscat { config } => {
            let ctx = context(&config)?;
            let out = pipeline::crosscat(&ctx)?;
            for r in &out.rows {
                let res: Vec<String> = r.results.iter().map(|(m, (l2, r2))| format!("{m} rel_l2 {l2:.4} r2 {r2:.4}")).collect();
                println!("{} -> {} (ratio {:.2}): {}", r.train_categories, r.test_categories, r.ratio, res.join("; "));
            }
            println!("written to {}", out.path.display());
            Ok(out.exit_code())
        }
        Command::Synth { out, seed, spec, per_category } => {
            let mut s = match spec {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|source| PipelineError::Io { path: path.clone(), source })?;
                    serde_json::from_str::<SyntheticSpec>(&text)
                        .map_err(|e| PipelineError::Usage(format!("{}: {e}", path.display())))?
                }
                None => SyntheticSpec::default(),
            };
            if let Some(n) = per_category {
                (s.n_fastback, s.n_estateback, s.n_notchback) = (n, n, n);
            }
            s.validate()?;
            let res = pipeline::synth(&s, seed, &out)?;
            println!(
                "{} designs written to {}; split {} train / {} val / {} test",
                res.dataset.designs.len(),
                out.display(),
                res.dataset.split.train.len(),
                res.dataset.split.val.len(),
                res.dataset.split.test.len()
            );
            println!("example config: {}", res.config_path.display());
            Ok(pipeline::EXIT_OK)
        }
        Command::Version => {
            println!("aerobench {HARNESS_VERSION}");
            Ok(pipeline::EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not size the worker pool: {e}");
            return ExitCode::from(4);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::evaluate::{
    needs_train_pool, paired_subsampled, predict, run_header, run_profile, sample_ids, sorted, write_inputs, PredictEnv,
};
use super::{io_err, write_json, PipelineError, RunContext};
use crate::adapter::{DesignFailure, EfficiencyProfile};
use crate::config::{CrossCatRowSpec, ModelKind, ModelSpec, RunConfig, SampleSize, SplitSpec};
use crate::dataset::{self, Manifest, ManifestEntry, PressureStats, StatsCache};
use crate::mesh::{self, native, Category, GeometryStats};
use crate::metrics::{self, Resolution};
use crate::numeric::{quantile_sorted, sorted_copy, Moments};
use crate::physics::FlowReference;
use crate::report::{self, CrossCatRow, RunHeader};
use crate::synth::{self, GeneratedDataset, SyntheticSpec};

#[derive(Debug, Clone, Serialize)]
pub struct IngestFailure {
    pub design_id: String,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub cache_manifest: PathBuf,
    pub stats_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub n_cached: usize,
    pub failures: Vec<IngestFailure>,
}

impl IngestOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            super::EXIT_OK
        } else {
            super::EXIT_IO
        }
    }
}

/// Parses every manifest mesh, writes an ABM1 copy under
/// `output_dir/cache/` with a manifest pointing at the copies, and emits
/// per-design and summary geometry CSVs. Designs that fail to load are
/// listed and left out of the cache manifest.
pub fn ingest(config: &RunConfig) -> Result<IngestOutcome, PipelineError> {
    let manifest = Manifest::load(&config.manifest)?;
    let cache = config.output_dir.join("cache");
    let mesh_dir = cache.join("meshes");
    std::fs::create_dir_all(&mesh_dir).map_err(io_err(&mesh_dir))?;

    let results: Vec<Result<GeometryStats, String>> = manifest
        .entries
        .par_iter()
        .map(|e| {
            let m = manifest.load_mesh(&e.id).map_err(|err| err.to_string())?;
            let path = mesh_dir.join(format!("{}.abm", e.id));
            std::fs::write(&path, native::write_native(&m)).map_err(|err| format!("{}: {err}", path.display()))?;
            Ok(mesh::geometry_stats(&m))
        })
        .collect();

    let mut entries = Vec::new();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut ok_stats = Vec::new();
    for (e, r) in manifest.entries.iter().zip(results) {
        match r {
            Ok(g) => {
                entries.push(ManifestEntry { id: e.id.clone(), category: e.category, path: format!("meshes/{}.abm", e.id) });
                rows.push(vec![
                    e.id.clone(),
                    e.category.to_string(),
                    g.n_points.to_string(),
                    g.n_cells.to_string(),
                    format!("{:.6}", g.surface_area),
                ]);
                ok_stats.push(g);
            }
            Err(error) => failures.push(IngestFailure { design_id: e.id.clone(), error }),
        }
    }
    let cached = Manifest::new(manifest.dataset_name.clone(), entries, &cache)?;
    let cache_manifest = cache.join("manifest.json");
    report::write_text(&cache_manifest, &(cached.to_json() + "\n"))?;

    let header = RunHeader::new(config.master_seed, "manifest", "full_mesh").with("dataset", manifest.dataset_name.clone());
    let cols = ["design_id", "category", "n_points (count)", "n_cells (count)", "surface_area (m²)"].map(String::from);
    let stats_csv = config.output_dir.join("geometry_stats.csv");
    report::write_text(&stats_csv, &report::csv_text(&header, &cols, &rows))?;

    let summary_csv = config.output_dir.join("geometry_summary.csv");
    report::write_text(&summary_csv, &geometry_summary(&ok_stats, &header))?;
    if !failures.is_empty() {
        write_json(&config.output_dir.join("ingest_failures.json"), &failures)?;
    }
    Ok(IngestOutcome { cache_manifest, stats_csv, summary_csv, n_cached: ok_stats.len(), failures })
}

fn geometry_summary(stats: &[GeometryStats], header: &RunHeader) -> String {
    let cols = ["quantity", "unit", "designs", "mean", "std (population)", "min", "q25", "median", "q75", "max"].map(String::from);
    let series: [(&str, &str, Vec<f64>); 3] = [
        ("n_points", "count", stats.iter().map(|g| g.n_points as f64).collect()),
        ("n_cells", "count", stats.iter().map(|g| g.n_cells as f64).collect()),
        ("surface_area", "m²", stats.iter().map(|g| g.surface_area).collect()),
    ];
    let rows: Vec<Vec<String>> = series
        .iter()
        .filter(|(_, _, v)| !v.is_empty())
        .map(|(name, unit, v)| {
            let m = Moments::from_slice(v);
            let s = sorted_copy(v);
            let f = |x: f64| format!("{x:.6}");
            vec![
                name.to_string(),
                unit.to_string(),
                v.len().to_string(),
                f(m.mean),
                f(m.population_variance().sqrt()),
                f(s[0]),
                f(quantile_sorted(&s, 0.25)),
                f(quantile_sorted(&s, 0.5)),
                f(quantile_sorted(&s, 0.75)),
                f(s[s.len() - 1]),
            ]
        })
        .collect();
    report::csv_text(header, &cols, &rows)
}

#[derive(Debug, Clone)]
pub struct StatsOutcome {
    pub stats: PressureStats,
    pub path: PathBuf,
}

/// Recomputes the train-only statistics and writes the cache
/// (`stats_cache`, or `output_dir/pressure_stats.json`).
pub fn stats(ctx: &RunContext) -> Result<StatsOutcome, PipelineError> {
    let cfg = &ctx.config;
    let path = cfg.stats_cache.clone().unwrap_or_else(|| cfg.output_dir.join("pressure_stats.json"));
    let stats = dataset::compute_pressure_stats(&ctx.manifest, &ctx.split.train, &cfg.field)?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    StatsCache::new(stats.clone(), &cfg.field, &ctx.split).write(&path)?;
    Ok(StatsOutcome { stats, path })
}

#[derive(Debug, Clone)]
pub struct ProfileOutcome {
    pub profile: EfficiencyProfile,
    pub path: PathBuf,
}

/// Profiles one adapter model in persistent mode on the first
/// `profile.n_designs` test samples and writes `<run_dir>/profile/<model>.json`.
pub fn profile_model(ctx: &RunContext, model: &str) -> Result<ProfileOutcome, PipelineError> {
    let cfg = &ctx.config;
    let spec = cfg
        .models
        .iter()
        .find(|m| m.name == model)
        .ok_or_else(|| PipelineError::Usage(format!("no model named '{model}' in the config")))?;
    let ModelKind::Adapter { command, .. } = &spec.kind else {
        return Err(PipelineError::Usage(format!("model '{model}' is built in; only adapters can be profiled")));
    };
    let work = ctx.config.output_dir.join(format!(".profile-{}-{model}", ctx.run_id));
    std::fs::create_dir_all(&work).map_err(io_err(&work))?;
    let split_path = work.join("split.json");
    dataset::write_split_json(&ctx.split, &split_path)?;
    let mut ids = sorted(&ctx.split.test);
    ids.truncate(cfg.profile.n_designs);
    let samples = sample_ids(&ctx.manifest, &ids, cfg)?;
    let inputs = write_inputs(&samples, &work.join("inputs"))?;
    let env = PredictEnv { config: cfg, split_path: &split_path, stats: None, work_dir: &work, train_pool: None };
    let profile = run_profile(cfg, command, &env, &inputs, &work.join("out"))?;
    let path = ctx.run_dir().join("profile").join(format!("{model}.json"));
    write_json(&path, &serde_json::json!({ "model": model, "profile": profile }))?;
    std::fs::remove_dir_all(&work).map_err(io_err(&work))?;
    Ok(ProfileOutcome { profile, path })
}

pub(crate) struct CrossCatMatrix {
    pub rows: Vec<CrossCatRow>,
    pub failures: BTreeMap<String, Vec<DesignFailure>>,
}

fn label(cats: &[Category]) -> String {
    dataset::category_set_label(cats)
}

/// One row of the matrix: build the zero-shot split, predict its test
/// designs with every model, score at the subsampled resolution.
fn crosscat_row(ctx: &RunContext, row: &CrossCatRowSpec, work: &Path, failures: &mut BTreeMap<String, Vec<DesignFailure>>) -> Result<CrossCatRow, PipelineError> {
    let cfg = &ctx.config;
    let cc = dataset::make_cross_category_split(
        &ctx.manifest,
        &row.train,
        &row.test,
        cfg.crosscat_val_fraction,
        cfg.crosscat_train_multiple,
        cfg.master_seed,
    )?;
    let dir = work.join("crosscat").join(&cc.split.name);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let split_path = dir.join("split.json");
    dataset::write_split_json(&cc.split, &split_path)?;

    let has_adapter = cfg.models.iter().any(|m| matches!(m.kind, ModelKind::Adapter { .. }));
    let stats = if has_adapter {
        Some(dataset::compute_pressure_stats(&ctx.manifest, &cc.split.train, &cfg.field)?)
    } else {
        None
    };
    let test = sample_ids(&ctx.manifest, &sorted(&cc.split.test), cfg)?;
    let inputs = write_inputs(&test, &dir.join("inputs"))?;
    let pool = if needs_train_pool(&cfg.models) { Some(sample_ids(&ctx.manifest, &sorted(&cc.split.train), cfg)?) } else { None };
    let env = PredictEnv { config: cfg, split_path: &split_path, stats: stats.as_ref(), work_dir: &dir, train_pool: pool.as_deref() };

    let mut results = BTreeMap::new();
    for m in &cfg.models {
        let out = predict(m, &env, &test, &inputs)?;
        if !out.failures.is_empty() {
            failures.entry(format!("{} [{}]", m.name, cc.split.name)).or_default().extend(out.failures.clone());
        }
        let paired = paired_subsampled(&ctx.manifest, &test, &out);
        if paired.is_empty() {
            continue;
        }
        let rec = metrics::evaluate(&m.name, &cc.split.name, Resolution::Subsampled, &paired)?;
        results.insert(m.name.clone(), (rec.rel_l2, rec.r2));
    }
    Ok(CrossCatRow {
        train_categories: label(&row.train),
        test_categories: label(&row.test),
        train_size: cc.train_size,
        val_size: cc.val_size,
        test_size: cc.test_size,
        ratio: cc.ratio,
        results,
    })
}

/// Evaluates every configured cross-category row and writes
/// `<run_dir>/crosscat_matrix.csv`.
pub(crate) fn crosscat_matrix(ctx: &RunContext, work: &Path) -> Result<CrossCatMatrix, PipelineError> {
    let mut failures = BTreeMap::new();
    let rows = ctx
        .config
        .crosscat
        .iter()
        .map(|r| crosscat_row(ctx, r, work, &mut failures))
        .collect::<Result<Vec<_>, _>>()?;
    let mut header = run_header(ctx, "cross-category (zero-shot)", Resolution::Subsampled.name())
        .with("crosscat_val_fraction", ctx.config.crosscat_val_fraction.to_string());
    if let Some(m) = ctx.config.crosscat_train_multiple {
        header = header.with("crosscat_train_multiple", m.to_string());
    }
    report::write_text(&ctx.run_dir().join("crosscat_matrix.csv"), &report::crosscat_csv(&rows, &header))?;
    Ok(CrossCatMatrix { rows, failures })
}

#[derive(Debug, Clone)]
pub struct CrossCatOutcome {
    pub path: PathBuf,
    pub rows: Vec<CrossCatRow>,
    pub failures: BTreeMap<String, Vec<DesignFailure>>,
}

impl CrossCatOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures.values().all(Vec::is_empty) {
            super::EXIT_OK
        } else {
            super::EXIT_ADAPTER
        }
    }
}

/// Only the cross-category matrix, without the main evaluation.
pub fn crosscat(ctx: &RunContext) -> Result<CrossCatOutcome, PipelineError> {
    if ctx.config.crosscat.is_empty() {
        return Err(PipelineError::Usage("config has no crosscat rows".into()));
    }
    if ctx.config.models.is_empty() {
        return Err(PipelineError::Usage("no models configured".into()));
    }
    let work = ctx.config.output_dir.join(format!(".crosscat-{}", ctx.run_id));
    let m = crosscat_matrix(ctx, &work)?;
    if m.failures.is_empty() {
        std::fs::remove_dir_all(&work).map_err(io_err(&work))?;
    }
    Ok(CrossCatOutcome { path: ctx.run_dir().join("crosscat_matrix.csv"), rows: m.rows, failures: m.failures })
}

#[derive(Debug, Clone)]
pub struct SynthOutcome {
    pub dataset: GeneratedDataset,
    pub config_path: PathBuf,
}

/// The six train/test combinations of the three archetypes: each pair
/// against the third and each single archetype against the other two.
pub fn all_crosscat_rows() -> Vec<CrossCatRowSpec> {
    use Category::{Estateback as E, Fastback as F, Notchback as N};
    let row = |train: &[Category], test: &[Category]| CrossCatRowSpec { train: train.to_vec(), test: test.to_vec() };
    vec![row(&[F, N], &[E]), row(&[E, F], &[N]), row(&[E, N], &[F]), row(&[F], &[E, N]), row(&[E], &[F, N]), row(&[N], &[E, F])]
}

/// A ready-to-run config for a generated dataset, with paths relative to
/// the dataset directory.
pub fn example_config(spec: &SyntheticSpec, seed: u64) -> RunConfig {
    let idw = |name: &str, k: usize| ModelSpec { name: name.into(), kind: ModelKind::Idw { k, power: synth::DEFAULT_IDW_POWER } };
    RunConfig {
        manifest: "manifest.json".into(),
        split: SplitSpec::Official { path: "split.json".into() },
        field: spec.field_name.clone(),
        sample_n: SampleSize::Count(spec.vertex_budget[0].min(500)),
        sampling_mode: Default::default(),
        master_seed: seed,
        bootstrap: crate::uncertainty::BootstrapConfig { master_seed: seed, ..Default::default() },
        metrics: metrics::Metric::LEADERBOARD.to_vec(),
        sort_key: metrics::Metric::RelL2,
        flow: Some(FlowReference { p_inf: 0.0, u_inf: 29.0, a_ref: 2.6, x_hat: [1.0, 0.0, 0.0] }),
        orientation_check: Default::default(),
        models: vec![idw("idw", synth::DEFAULT_IDW_K), idw("nearest", 1)],
        resolutions: vec![Resolution::Subsampled, Resolution::FullMesh],
        output_dir: "runs".into(),
        run_id: None,
        adapter_timeout_s: crate::adapter::DEFAULT_TIMEOUT_SECS,
        profile: Default::default(),
        crosscat: all_crosscat_rows(),
        crosscat_val_fraction: 0.1,
        crosscat_train_multiple: None,
        pca: true,
        stats_cache: Some("pressure_stats.json".into()),
    }
}

/// Generates a synthetic dataset plus `aerobench.json`, a config that
/// evaluates the built-in baselines on it.
pub fn synth(spec: &SyntheticSpec, seed: u64, out_dir: &Path) -> Result<SynthOutcome, PipelineError> {
    let dataset = synth::generate(spec, seed, out_dir)?;
    let config_path = out_dir.join("aerobench.json");
    write_json(&config_path, &example_config(spec, seed).to_json())?;
    Ok(SynthOutcome { dataset, config_path })
}

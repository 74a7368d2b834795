use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{io_err, write_json, PipelineError, RunContext};
use crate::adapter::{
    self, run_batch, ApfFile, BatchJob, BatchOptions, DesignFailure, EfficiencyProfile, FailureKind, PredictionFile, ProfileOptions, Space,
};
use crate::config::{ModelKind, ModelSpec, RunConfig};
use crate::dataset::{self, DatasetError, Manifest, PressureStats, Split, StatsCache};
use crate::mesh::Category;
use crate::metrics::{self, EvaluationRecord, PairedField, Resolution};
use crate::physics::{drag_consistency_report, DragConsistency};
use crate::report::{self, pca, svg, Leaderboard, ModelReport, RunHeader, HARNESS_VERSION};
use crate::sampling::{interpolate_to_full, sample_vertices_with, SampleSet};
use crate::synth::IdwModel;
use crate::uncertainty::{bootstrap_metric, BootstrapData, BootstrapSummary};

/// What `evaluate` produced.
#[derive(Debug, Clone)]
pub struct EvaluateOutcome {
    pub run_id: String,
    pub run_dir: PathBuf,
    pub leaderboard: Leaderboard,
    /// Per model, the designs its adapter failed on.
    pub failures: BTreeMap<String, Vec<DesignFailure>>,
}

impl EvaluateOutcome {
    pub fn n_failures(&self) -> usize {
        self.failures.values().map(Vec::len).sum()
    }

    pub fn exit_code(&self) -> i32 {
        if self.n_failures() == 0 {
            super::EXIT_OK
        } else {
            super::EXIT_ADAPTER
        }
    }
}

/// Samples each design in `ids` with the run's seed, size and mode.
pub(crate) fn sample_ids(manifest: &Manifest, ids: &[String], config: &RunConfig) -> Result<Vec<SampleSet>, PipelineError> {
    ids.par_iter()
        .map(|id| {
            let mesh = manifest.load_mesh(id)?;
            let n = config.sample_n.resolve(mesh.n_points());
            Ok(sample_vertices_with(&mesh, &config.field, n, config.master_seed, config.sampling_mode)?)
        })
        .collect()
}

pub(crate) fn sorted(ids: &[String]) -> Vec<String> {
    let mut v = ids.to_vec();
    v.sort();
    v
}

/// Writes one APF input per sample; returns the paths in sample order.
pub(crate) fn write_inputs(samples: &[SampleSet], dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    samples
        .par_iter()
        .map(|s| {
            let path = dir.join(format!("{}.apf", s.design_id));
            adapter::write_apf(&path, &ApfFile::from_sample(s)).map_err(adapter::AdapterError::from)?;
            Ok(path)
        })
        .collect()
}

/// Train-only pressure statistics, read from the configured cache when it
/// matches the split and recomputed (and rewritten) otherwise.
pub(crate) fn resolve_stats(config: &RunConfig, manifest: &Manifest, split: &Split) -> Result<Option<PressureStats>, PipelineError> {
    if split.train.is_empty() {
        return Ok(None);
    }
    if let Some(path) = &config.stats_cache {
        if path.is_file() {
            let cache = StatsCache::read(path)?;
            if cache.matches(split, &config.field) {
                return Ok(Some(cache.stats));
            }
        }
    }
    let stats = dataset::compute_pressure_stats(manifest, &split.train, &config.field)?;
    if let Some(path) = &config.stats_cache {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        StatsCache::new(stats.clone(), &config.field, split).write(path)?;
    }
    Ok(Some(stats))
}

/// Everything a model needs to predict one split.
pub(crate) struct PredictEnv<'a> {
    pub config: &'a RunConfig,
    pub split_path: &'a Path,
    pub stats: Option<&'a PressureStats>,
    pub work_dir: &'a Path,
    /// Sampled training designs; required by in-process IDW.
    pub train_pool: Option<&'a [SampleSet]>,
}

pub(crate) struct ModelOutput {
    pub predictions: BTreeMap<String, Vec<f64>>,
    pub failures: Vec<DesignFailure>,
    pub params_m: Option<f64>,
}

pub(crate) fn needs_train_pool(models: &[ModelSpec]) -> bool {
    models.iter().any(|m| matches!(m.kind, ModelKind::Idw { .. }))
}

/// Runs one model over the test samples. Every prediction, in-process or
/// not, passes through [`PredictionFile`] and [`adapter::to_physical`].
pub(crate) fn predict(model: &ModelSpec, env: &PredictEnv<'_>, test: &[SampleSet], inputs: &[PathBuf]) -> Result<ModelOutput, PipelineError> {
    let mut files: Vec<PredictionFile> = Vec::with_capacity(test.len());
    let mut failures = Vec::new();
    let mut params_m = None;
    match &model.kind {
        ModelKind::Adapter { command, params_m: declared } => {
            let out_dir = env.work_dir.join(&model.name);
            std::fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
            let jobs: Vec<BatchJob> = test
                .iter()
                .zip(inputs)
                .map(|(s, input)| BatchJob {
                    design_id: s.design_id.clone(),
                    input: input.clone(),
                    output: out_dir.join(format!("{}.apf", s.design_id)),
                    expected_n: s.n(),
                })
                .collect();
            let cmd = command.substitute(&env.config.manifest, env.split_path);
            let opts = BatchOptions { timeout: Duration::from_secs(env.config.adapter_timeout_s) };
            let result = run_batch(&cmd, &jobs, &opts);
            params_m = declared.or_else(|| result.predictions.iter().find_map(|p| p.param_count).map(|c| c / 1e6));
            files = result.predictions;
            failures = result.failures;
        }
        ModelKind::Idw { k, power } => {
            let pool = env.train_pool.ok_or_else(|| PipelineError::Usage("IDW needs a non-empty training split".into()))?;
            let idw = IdwModel::fit(pool, *k, *power)?;
            for s in test {
                files.push(PredictionFile {
                    design_id: s.design_id.clone(),
                    values: idw.predict(&s.points),
                    space: Space::Physical,
                    sample_seed: s.seed,
                    param_count: None,
                });
            }
        }
        ModelKind::Identity => {
            for s in test {
                files.push(PredictionFile {
                    design_id: s.design_id.clone(),
                    values: s.truth.clone(),
                    space: Space::Physical,
                    sample_seed: s.seed,
                    param_count: None,
                });
            }
        }
    }
    let mut predictions = BTreeMap::new();
    for f in &files {
        match adapter::to_physical(f, env.stats) {
            Ok(v) => {
                predictions.insert(f.design_id.clone(), v);
            }
            Err(e) => failures.push(DesignFailure { design_id: f.design_id.clone(), kind: FailureKind::Malformed { reason: e.to_string() } }),
        }
    }
    failures.sort_by(|a, b| a.design_id.cmp(&b.design_id));
    Ok(ModelOutput { predictions, failures, params_m })
}

pub(crate) fn category_of(manifest: &Manifest, id: &str) -> Category {
    manifest.entry(id).map_or_else(|| Category::from_design_id(id), |e| e.category)
}

/// Pairs the subsampled truth with a model's predictions, skipping designs
/// the model failed on.
pub(crate) fn paired_subsampled(manifest: &Manifest, test: &[SampleSet], out: &ModelOutput) -> Vec<PairedField> {
    test.iter()
        .filter_map(|s| {
            out.predictions.get(&s.design_id).map(|p| PairedField {
                design_id: s.design_id.clone(),
                category: category_of(manifest, &s.design_id),
                truth: s.truth.clone(),
                prediction: p.clone(),
            })
        })
        .collect()
}

type FullPass = Vec<Vec<(Option<PairedField>, Option<Result<DragConsistency, String>>)>>;

/// Reloads each test mesh once, transfers every model's predictions to all
/// vertices and runs the drag check. Indexed `[design][model]`.
fn full_mesh_pass(ctx: &RunContext, test: &[SampleSet], outputs: &[ModelOutput], keep_fields: bool) -> Result<FullPass, PipelineError> {
    let cfg = &ctx.config;
    test.par_iter()
        .map(|s| {
            let mesh = ctx.manifest.load_mesh(&s.design_id)?;
            let truth = mesh
                .field(&cfg.field)
                .ok_or_else(|| DatasetError::MissingField { design: s.design_id.clone(), field: cfg.field.clone() })?;
            outputs
                .iter()
                .map(|o| {
                    let Some(pred) = o.predictions.get(&s.design_id) else {
                        return Ok((None, None));
                    };
                    let full = interpolate_to_full(&mesh, s, pred)?;
                    let drag = cfg
                        .flow
                        .map(|f| drag_consistency_report(&mesh, truth, &full, &f, cfg.orientation_check).map_err(|e| e.to_string()));
                    let paired = keep_fields.then(|| PairedField {
                        design_id: s.design_id.clone(),
                        category: mesh.category,
                        truth: truth.to_vec(),
                        prediction: full,
                    });
                    Ok((paired, drag))
                })
                .collect()
        })
        .collect()
}

pub(crate) fn run_header(ctx: &RunContext, split_name: &str, resolution: &str) -> RunHeader {
    let cfg = &ctx.config;
    let b = &cfg.bootstrap;
    RunHeader::new(cfg.master_seed, split_name, resolution)
        .with("run_id", ctx.run_id.clone())
        .with("sample_n", serde_json::to_value(cfg.sample_n).expect("serialisable").to_string())
        .with("sampling_mode", serde_json::to_value(cfg.sampling_mode).expect("serialisable").as_str().unwrap_or_default())
        .with(
            "bootstrap",
            format!(
                "B={}, confidence={}, stratified={}, unit={}, percentile CI",
                b.replicates,
                b.confidence,
                b.stratify_by_category,
                serde_json::to_value(b.resample).expect("serialisable").as_str().unwrap_or_default()
            ),
        )
        .with("std_convention", "population (normalisation stats)")
}

#[derive(Serialize)]
struct ModelMeta {
    name: String,
    kind: &'static str,
    n_scored: usize,
    n_failed: usize,
    failures: Vec<DesignFailure>,
}

fn kind_name(k: &ModelKind) -> &'static str {
    match k {
        ModelKind::Adapter { .. } => "adapter",
        ModelKind::Idw { .. } => "idw",
        ModelKind::Identity => "identity",
    }
}

fn write_physics(dir: &Path, name: &str, ctx: &RunContext, results: Vec<Result<DragConsistency, (String, String)>>) -> Result<(), PipelineError> {
    let flow = ctx.config.flow.expect("physics only runs with a flow reference");
    let mut designs = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(d) => designs.push(d),
            Err((id, msg)) => errors.push(json!({ "design_id": id, "error": msg })),
        }
    }
    let n = designs.len().max(1) as f64;
    let rel: Vec<f64> = designs.iter().filter_map(|d| d.rel_diff).collect();
    let summary = json!({
        "n_designs": designs.len(),
        "mean_abs_diff_m4_per_s2": designs.iter().map(|d| d.abs_diff).sum::<f64>() / n,
        "mean_rel_diff": if rel.is_empty() { None } else { Some(rel.iter().sum::<f64>() / rel.len() as f64) },
        "mean_cd_true": designs.iter().map(|d| d.cd_true).sum::<f64>() / n,
        "mean_cd_pred": designs.iter().map(|d| d.cd_pred).sum::<f64>() / n,
    });
    let doc = json!({
        "model": name,
        "quantity": "pressure drag per unit density, D_p/rho = -sum_f (p_f - p_inf) (n_f . x_hat) A_f",
        "units": { "drag": "m^4/s^2", "cd": "dimensionless" },
        "flow": flow,
        "orientation_check": ctx.config.orientation_check,
        "notes": [
            "p_inf is a gauge offset: on a closed surface a constant shift integrates to zero, so D_p does not depend on it",
            "friction drag unavailable: surface files carry no wall-shear stress, so only the pressure part of D = D_p + D_f is reported",
            "predicted fields are evaluated on the full mesh after 1-NN transfer from the sampled vertices",
        ],
        "summary": summary,
        "designs": designs,
        "errors": errors,
    });
    write_json(&dir.join(format!("{name}.json")), &doc)
}

const CATEGORY_COLORS: [(Category, &str); 4] = [
    (Category::Fastback, "#1f77b4"),
    (Category::Estateback, "#d62728"),
    (Category::Notchback, "#2ca02c"),
    (Category::Unknown, "#7f7f7f"),
];

/// PCA of the coordinate-histogram descriptors of every manifest design.
fn write_pca(ctx: &RunContext, run_dir: &Path, header: &RunHeader) -> Result<serde_json::Value, PipelineError> {
    let entries = &ctx.manifest.entries;
    let loaded: Vec<Result<Vec<f64>, String>> = entries
        .par_iter()
        .map(|e| ctx.manifest.load_mesh(&e.id).map(|m| pca::coordinate_histogram(&m)).map_err(|err| err.to_string()))
        .collect();
    let mut ids = Vec::new();
    let mut features = Vec::new();
    let mut skipped = Vec::new();
    for (e, r) in entries.iter().zip(loaded) {
        match r {
            Ok(f) => {
                ids.push((e.id.clone(), e.category.to_string()));
                features.push(f);
            }
            Err(msg) => skipped.push(json!({ "design_id": e.id, "error": msg })),
        }
    }
    let result = match pca::pca_projection(&features, 2) {
        Ok(r) => r,
        Err(e) => return Ok(json!({ "status": "skipped", "reason": e.to_string(), "unreadable": skipped })),
    };
    report::write_text(&run_dir.join("pca.csv"), &report::pca_csv(&ids, &result, header))?;
    let series: Vec<svg::Series<'_>> = CATEGORY_COLORS
        .iter()
        .filter_map(|(cat, color)| {
            let points: Vec<(f64, f64)> = ids
                .iter()
                .zip(&result.coordinates)
                .filter(|((_, c), _)| *c == cat.to_string())
                .map(|(_, xy)| (xy[0], xy[1]))
                .collect();
            (!points.is_empty()).then(|| svg::Series { label: cat_label(*cat), color, points })
        })
        .collect();
    let pct = |k: usize| result.explained_variance_ratio.get(k).map_or(0.0, |r| r * 100.0);
    let plot = svg::scatter(
        "Design space (coordinate-histogram PCA)",
        &format!("PC1 ({:.1}% variance)", pct(0)),
        &format!("PC2 ({:.1}% variance)", pct(1)),
        &series,
    );
    report::write_text(&run_dir.join("pca.svg"), &plot)?;
    Ok(json!({
        "status": "ok",
        "descriptor": pca::DESCRIPTOR_VERSION,
        "n_designs": ids.len(),
        "explained_variance_ratio": result.explained_variance_ratio,
        "eigenvalues": result.eigenvalues,
        "iterations": result.iterations,
        "unreadable": skipped,
    }))
}

fn cat_label(c: Category) -> &'static str {
    match c {
        Category::Fastback => "Fastback",
        Category::Estateback => "Estateback",
        Category::Notchback => "Notchback",
        Category::Unknown => "Unknown",
    }
}

/// Full evaluation run: sample, predict, score at each resolution,
/// bootstrap, drag check, report. Adapter failures do not abort the run;
/// they are listed in `run_meta.json` and reflected in the exit code.
pub fn evaluate(ctx: &RunContext) -> Result<EvaluateOutcome, PipelineError> {
    let cfg = &ctx.config;
    if cfg.models.is_empty() {
        return Err(PipelineError::Usage("no models configured".into()));
    }
    let run_dir = ctx.run_dir();
    let work = ctx.work_dir();
    std::fs::create_dir_all(&run_dir).map_err(io_err(&run_dir))?;
    std::fs::create_dir_all(&work).map_err(io_err(&work))?;
    let split_path = work.join("split.json");
    dataset::write_split_json(&ctx.split, &split_path)?;

    let stats = resolve_stats(cfg, &ctx.manifest, &ctx.split)?;
    let test = sample_ids(&ctx.manifest, &sorted(&ctx.split.test), cfg)?;
    let inputs = write_inputs(&test, &work.join("inputs"))?;
    let train_pool = if needs_train_pool(&cfg.models) && !ctx.split.train.is_empty() {
        Some(sample_ids(&ctx.manifest, &sorted(&ctx.split.train), cfg)?)
    } else {
        None
    };
    let env = PredictEnv {
        config: cfg,
        split_path: &split_path,
        stats: stats.as_ref(),
        work_dir: &work,
        train_pool: train_pool.as_deref(),
    };
    let outputs: Vec<ModelOutput> = cfg.models.iter().map(|m| predict(m, &env, &test, &inputs)).collect::<Result<_, _>>()?;

    let mut profiles: BTreeMap<String, EfficiencyProfile> = BTreeMap::new();
    if cfg.profile.during_evaluate {
        for m in &cfg.models {
            if let ModelKind::Adapter { command, .. } = &m.kind {
                let n = cfg.profile.n_designs.min(inputs.len());
                let p = run_profile(cfg, command, &env, &inputs[..n], &work.join(format!("profile-{}", m.name)))?;
                profiles.insert(m.name.clone(), p);
            }
        }
    }

    let want_full = cfg.resolutions.contains(&Resolution::FullMesh);
    let full = if want_full || cfg.flow.is_some() {
        Some(full_mesh_pass(ctx, &test, &outputs, want_full)?)
    } else {
        None
    };

    let split_name = ctx.split.name.as_str();
    let primary = cfg.resolutions[0];
    let mut records: BTreeMap<Resolution, Vec<EvaluationRecord>> = BTreeMap::new();
    let mut primary_fields: Vec<Option<Vec<PairedField>>> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    for (mi, (m, out)) in cfg.models.iter().zip(&outputs).enumerate() {
        let mut model_primary = None;
        for &res in &cfg.resolutions {
            let paired: Vec<PairedField> = match res {
                Resolution::Subsampled => paired_subsampled(&ctx.manifest, &test, out),
                Resolution::FullMesh => full
                    .as_ref()
                    .expect("full pass ran")
                    .iter()
                    .filter_map(|per_model| per_model[mi].0.clone())
                    .collect(),
            };
            if paired.is_empty() {
                notes.push(format!("model '{}' has no scored designs at {}", m.name, res.name()));
                continue;
            }
            records.entry(res).or_default().push(metrics::evaluate(&m.name, split_name, res, &paired)?);
            if res == primary {
                model_primary = Some(paired);
            }
        }
        primary_fields.push(model_primary);
    }

    let mut reports = Vec::new();
    let boot_dir = run_dir.join("bootstrap");
    for ((m, out), fields) in cfg.models.iter().zip(&outputs).zip(&primary_fields) {
        let Some(fields) = fields else { continue };
        let record = records[&primary].iter().find(|r| r.model_name == m.name).expect("record exists").clone();
        let mut summaries = BTreeMap::new();
        match BootstrapData::new(fields) {
            Ok(data) => {
                for &metric in &cfg.metrics {
                    match bootstrap_metric(&data, metric, &cfg.bootstrap) {
                        Ok(s) => {
                            write_bootstrap(&boot_dir, &m.name, primary, &s)?;
                            summaries.insert(metric.name().to_string(), s);
                        }
                        Err(e) => notes.push(format!("bootstrap of {} for '{}' skipped: {e}", metric.name(), m.name)),
                    }
                }
            }
            Err(e) => notes.push(format!("bootstrap for '{}' skipped: {e}", m.name)),
        }
        reports.push(ModelReport {
            name: m.name.clone(),
            record,
            summaries,
            profile: profiles.get(&m.name).cloned(),
            params_m: out.params_m,
        });
    }
    if reports.is_empty() {
        return Err(PipelineError::Usage("no model produced a single scorable prediction".into()));
    }

    let header = run_header(ctx, split_name, primary.name());
    let board = report::build_leaderboard(&reports, &cfg.metrics, cfg.sort_key, cfg.bootstrap.display)?;
    report::write_text(&run_dir.join("leaderboard.csv"), &board.to_csv(&header))?;
    report::write_text(&run_dir.join("leaderboard.json"), &board.to_json(&header))?;
    report::write_text(&run_dir.join("leaderboard.md"), &board.to_markdown(&header))?;
    report::write_text(&run_dir.join("percentiles.csv"), &report::percentile_csv(&records[&primary], &header))?;

    if let (Some(sub), Some(fm)) = (records.get(&Resolution::Subsampled), records.get(&Resolution::FullMesh)) {
        let both: Vec<EvaluationRecord> = sub.iter().filter(|s| fm.iter().any(|f| f.model_name == s.model_name)).cloned().collect();
        if !both.is_empty() {
            let h = header.for_resolution("subsampled vs full_mesh");
            let rows = report::dual_resolution_table(&both, fm.iter().filter(|f| both.iter().any(|s| s.model_name == f.model_name)).cloned().collect::<Vec<_>>().as_slice())?;
            report::write_text(&run_dir.join("dual_resolution.csv"), &report::dual_resolution_csv(&rows, &h))?;
            report::write_text(&run_dir.join("dual_resolution.md"), &report::dual_resolution_markdown(&rows, &h))?;
        }
    }
    for (res, recs) in &records {
        for r in recs {
            write_json(&run_dir.join("records").join(format!("{}.{}.json", r.model_name, res.name())), &r.to_json())?;
        }
    }

    if let Some(full) = &full {
        if cfg.flow.is_some() {
            for (mi, m) in cfg.models.iter().enumerate() {
                let results: Vec<Result<DragConsistency, (String, String)>> = full
                    .iter()
                    .zip(&test)
                    .filter_map(|(per_model, s)| per_model[mi].1.clone().map(|r| r.map_err(|e| (s.design_id.clone(), e))))
                    .collect();
                write_physics(&run_dir.join("physics"), &m.name, ctx, results)?;
            }
        }
    }

    let mut failures: BTreeMap<String, Vec<DesignFailure>> = BTreeMap::new();
    for (m, out) in cfg.models.iter().zip(&outputs) {
        if !out.failures.is_empty() {
            failures.insert(m.name.clone(), out.failures.clone());
        }
    }

    let crosscat = if cfg.crosscat.is_empty() {
        serde_json::Value::Null
    } else {
        let cc = super::commands::crosscat_matrix(ctx, &work)?;
        for (k, v) in cc.failures {
            failures.entry(k).or_default().extend(v);
        }
        serde_json::to_value(&cc.rows).expect("serialisable")
    };

    let pca = if cfg.pca { write_pca(ctx, &run_dir, &header.for_resolution("full_mesh"))? } else { json!({ "status": "disabled" }) };

    let models_meta: Vec<ModelMeta> = cfg
        .models
        .iter()
        .zip(&outputs)
        .map(|(m, o)| ModelMeta {
            name: m.name.clone(),
            kind: kind_name(&m.kind),
            n_scored: o.predictions.len(),
            n_failed: o.failures.len(),
            failures: o.failures.clone(),
        })
        .collect();
    let meta = json!({
        "harness_version": HARNESS_VERSION,
        "run_id": ctx.run_id,
        "config": cfg.to_json(),
        "seed_override": ctx.seed_override,
        "split": ctx.split_info,
        "pressure_stats": stats,
        "primary_resolution": primary.name(),
        "models": models_meta,
        "crosscat_rows": crosscat,
        "pca": pca,
        "protocol": header.protocol,
        "notes": notes,
    });
    write_json(&run_dir.join("run_meta.json"), &meta)?;

    if failures.is_empty() {
        std::fs::remove_dir_all(&work).map_err(io_err(&work))?;
    }
    Ok(EvaluateOutcome { run_id: ctx.run_id.clone(), run_dir, leaderboard: board, failures })
}

fn write_bootstrap(dir: &Path, model: &str, res: Resolution, s: &BootstrapSummary) -> Result<(), PipelineError> {
    let doc = json!({ "model": model, "resolution": res.name(), "summary": s });
    write_json(&dir.join(model).join(format!("{}.json", s.metric)), &doc)
}

pub(crate) fn run_profile(
    cfg: &RunConfig,
    command: &adapter::AdapterCommand,
    env: &PredictEnv<'_>,
    inputs: &[PathBuf],
    out_dir: &Path,
) -> Result<EfficiencyProfile, PipelineError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let cmd = command.substitute(&cfg.manifest, env.split_path);
    let opts = ProfileOptions {
        n_warmup: cfg.profile.n_warmup,
        n_timed: cfg.profile.n_timed,
        timeout: Duration::from_secs(cfg.adapter_timeout_s),
    };
    Ok(adapter::profile(&cmd, inputs, out_dir, &opts)?)
}

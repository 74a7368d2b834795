//! Leaderboards, comparison tables and their CSV / JSON / Markdown forms.
//!
//! Every emitted file starts with the same header block (harness version,
//! seed, split, resolution, protocol choices). Output text is a pure
//! function of the inputs: rows are sorted, maps are ordered, and displayed
//! numbers go through fixed rounding rules.

pub mod pca;
pub mod svg;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::EfficiencyProfile;
use crate::metrics::{EvaluationRecord, Metric, MEDIAN_REL_EPSILON, PERCENTILE_LEVELS};
use crate::uncertainty::{gum_round_column, significance_by_overlap, BootstrapSummary, GumDisplay, Significance, UncertaintyDisplay};

pub const HARNESS_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MISSING: &str = "—";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no models to report")]
    NoModels,
    #[error("model '{0}' lacks a record at one of the two resolutions")]
    MissingPair(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Provenance block written at the top of every report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub harness_version: String,
    pub master_seed: u64,
    pub split_name: String,
    pub resolution: String,
    pub protocol: BTreeMap<String, String>,
}

impl RunHeader {
    pub fn new(master_seed: u64, split_name: &str, resolution: &str) -> Self {
        let mut protocol = BTreeMap::new();
        protocol.insert("interpolation".into(), "1nn (sampled vertices keep their own prediction)".into());
        protocol.insert("pooling".into(), "points".into());
        protocol.insert("median_rel_epsilon_m2_per_s2".into(), format!("{MEDIAN_REL_EPSILON:e}"));
        protocol.insert("percentile_convention".into(), "linear interpolation, h = (n - 1) q".into());
        protocol.insert("pca_descriptor".into(), pca::DESCRIPTOR_VERSION.into());
        RunHeader {
            harness_version: HARNESS_VERSION.into(),
            master_seed,
            split_name: split_name.into(),
            resolution: resolution.into(),
            protocol,
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.protocol.insert(key.into(), value.into());
        self
    }

    pub fn for_resolution(&self, resolution: &str) -> Self {
        RunHeader { resolution: resolution.into(), ..self.clone() }
    }

    fn entries(&self) -> Vec<(String, String)> {
        let mut v = vec![
            ("harness_version".to_string(), self.harness_version.clone()),
            ("master_seed".to_string(), self.master_seed.to_string()),
            ("split".to_string(), self.split_name.clone()),
            ("resolution".to_string(), self.resolution.clone()),
        ];
        v.extend(self.protocol.iter().map(|(k, v)| (k.clone(), v.clone())));
        v
    }

    /// `# key: value` lines for CSV files.
    pub fn comment_block(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("# {k}: {v}\n")).collect()
    }

    fn markdown_block(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("- {k}: {v}\n")).collect()
    }
}

/// Everything known about one model for one resolution.
#[derive(Debug, Clone)]
pub struct ModelReport {
    pub name: String,
    pub record: EvaluationRecord,
    /// Keyed by metric name.
    pub summaries: BTreeMap<String, BootstrapSummary>,
    pub profile: Option<EfficiencyProfile>,
    pub params_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricCell {
    pub metric: String,
    pub unit: String,
    pub point_estimate: f64,
    pub bootstrap_mean: Option<f64>,
    pub uncertainty: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyCells {
    pub params_m: String,
    pub peak_memory_gb: String,
    pub mean_latency_ms: String,
    pub throughput_sps: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub name: String,
    pub params_m: Option<f64>,
    pub peak_memory_gb: Option<f64>,
    pub peak_memory_source: Option<String>,
    pub mean_latency_ms: Option<f64>,
    pub latency_std_ms: Option<f64>,
    pub throughput_sps: Option<f64>,
    pub efficiency_display: EfficiencyCells,
    pub cells: Vec<MetricCell>,
    /// Against rank 1 on the sort metric; `None` for rank 1 itself or when
    /// either interval is missing.
    pub significance: Option<Significance>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Leaderboard {
    pub sort_key: String,
    pub metrics: Vec<String>,
    pub uncertainty_display: UncertaintyDisplay,
    pub rows: Vec<LeaderboardRow>,
}

/// Ranks models on `sort_key` (best first; ties by name) and formats every
/// column with shared GUM rounding.
pub fn build_leaderboard(
    models: &[ModelReport],
    metrics: &[Metric],
    sort_key: Metric,
    display: UncertaintyDisplay,
) -> Result<Leaderboard, ReportError> {
    if models.is_empty() {
        return Err(ReportError::NoModels);
    }
    let mut order: Vec<&ModelReport> = models.iter().collect();
    order.sort_by(|a, b| {
        let (x, y) = (a.record.get(sort_key), b.record.get(sort_key));
        let c = if sort_key.higher_is_better() { y.total_cmp(&x) } else { x.total_cmp(&y) };
        c.then_with(|| a.name.cmp(&b.name))
    });

    let mut columns: Vec<Vec<String>> = Vec::new();
    for &m in metrics {
        let pairs: Vec<(f64, f64)> = order
            .iter()
            .map(|r| match r.summaries.get(m.name()) {
                Some(s) => (s.mean, s.uncertainty(display)),
                None => (r.record.get(m), 0.0),
            })
            .collect();
        let rounded = gum_round_column(&pairs);
        columns.push(
            order
                .iter()
                .zip(rounded)
                .map(|(r, g)| {
                    if r.summaries.contains_key(m.name()) {
                        g.to_string()
                    } else {
                        GumDisplay { uncertainty: None, ..g }.to_string()
                    }
                })
                .collect(),
        );
    }
    let efficiency = efficiency_columns(&order);

    let reference = order[0].summaries.get(sort_key.name());
    let rows = order
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let cells = metrics
                .iter()
                .enumerate()
                .map(|(j, &m)| {
                    let s = r.summaries.get(m.name());
                    MetricCell {
                        metric: m.name().into(),
                        unit: m.unit().into(),
                        point_estimate: r.record.get(m),
                        bootstrap_mean: s.map(|s| s.mean),
                        uncertainty: s.map(|s| s.uncertainty(display)),
                        ci_lower: s.map(|s| s.ci_lower),
                        ci_upper: s.map(|s| s.ci_upper),
                        display: columns[j][i].clone(),
                    }
                })
                .collect();
            let significance = match (i, reference, r.summaries.get(sort_key.name())) {
                (0, _, _) => None,
                (_, Some(a), Some(b)) => significance_by_overlap(a, b).ok(),
                _ => None,
            };
            let p = r.profile.as_ref();
            LeaderboardRow {
                rank: i + 1,
                name: r.name.clone(),
                params_m: r.params_m,
                peak_memory_gb: p.map(|p| p.peak_memory_gb),
                peak_memory_source: p.map(|p| p.peak_memory_source.clone()),
                mean_latency_ms: p.map(|p| p.mean_latency_ms),
                latency_std_ms: p.map(|p| p.latency_std_ms),
                throughput_sps: p.map(|p| p.throughput_sps),
                efficiency_display: efficiency[i].clone(),
                cells,
                significance,
            }
        })
        .collect();
    Ok(Leaderboard {
        sort_key: sort_key.name().into(),
        metrics: metrics.iter().map(|m| m.name().to_string()).collect(),
        uncertainty_display: display,
        rows,
    })
}

fn efficiency_columns(order: &[&ModelReport]) -> Vec<EfficiencyCells> {
    // throughput uncertainty propagated to first order from the latency spread
    let column = |f: &dyn Fn(&ModelReport) -> Option<(f64, f64)>| -> Vec<String> {
        let vals: Vec<Option<(f64, f64)>> = order.iter().map(|r| f(r)).collect();
        let present: Vec<(f64, f64)> = vals.iter().flatten().copied().collect();
        let mut rounded = gum_round_column(&present).into_iter();
        vals.iter()
            .map(|v| match v {
                Some(_) => rounded.next().expect("one per present value").to_string(),
                None => MISSING.to_string(),
            })
            .collect()
    };
    let params = column(&|r| r.params_m.map(|p| (p, 0.0)));
    let memory = column(&|r| r.profile.as_ref().map(|p| (p.peak_memory_gb, 0.0)));
    let latency = column(&|r| r.profile.as_ref().map(|p| (p.mean_latency_ms, p.latency_std_ms)));
    let throughput = column(&|r| {
        r.profile
            .as_ref()
            .map(|p| (p.throughput_sps, 1000.0 * p.latency_std_ms / (p.mean_latency_ms * p.mean_latency_ms)))
    });
    (0..order.len())
        .map(|i| EfficiencyCells {
            params_m: params[i].clone(),
            peak_memory_gb: memory[i].clone(),
            mean_latency_ms: latency[i].clone(),
            throughput_sps: throughput[i].clone(),
        })
        .collect()
}

fn significance_label(s: Option<Significance>, rank: usize) -> &'static str {
    match (rank, s) {
        (1, _) => "reference",
        (_, Some(Significance::Separated)) => "separated",
        (_, Some(Significance::Overlapping)) => "overlapping",
        (_, None) => MISSING,
    }
}

pub(crate) fn csv_text(header: &RunHeader, columns: &[String], rows: &[Vec<String>]) -> String {
    let mut out = header.comment_block().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(columns).expect("in-memory write");
        for r in rows {
            w.write_record(r).expect("in-memory write");
        }
        w.flush().expect("in-memory flush");
    }
    String::from_utf8(out).expect("utf-8 input")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

const EFFICIENCY_HEADERS: [&str; 4] = ["Params (M)", "Peak Memory (GB)", "Mean Latency (ms)", "Throughput (sps)"];

impl Leaderboard {
    pub fn to_csv(&self, header: &RunHeader) -> String {
        let mut cols: Vec<String> = vec!["rank".into(), "model".into()];
        cols.extend(EFFICIENCY_HEADERS.iter().map(|h| h.to_string()));
        cols.push("latency_std (ms)".into());
        for c in &self.rows.first().map(|r| r.cells.clone()).unwrap_or_default() {
            let label = Metric::from_name(&c.metric).map(|m| m.label()).unwrap_or("");
            cols.push(label.to_string());
            cols.push(format!("{} point estimate ({})", c.metric, c.unit));
            cols.push(format!("{} uncertainty ({})", c.metric, c.unit));
            cols.push(format!("{} ci_lower ({})", c.metric, c.unit));
            cols.push(format!("{} ci_upper ({})", c.metric, c.unit));
        }
        cols.push(format!("significance vs rank 1 ({})", self.sort_key));
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![
                    r.rank.to_string(),
                    r.name.clone(),
                    r.efficiency_display.params_m.clone(),
                    r.efficiency_display.peak_memory_gb.clone(),
                    r.efficiency_display.mean_latency_ms.clone(),
                    r.efficiency_display.throughput_sps.clone(),
                    opt(r.latency_std_ms),
                ];
                for c in &r.cells {
                    v.push(c.display.clone());
                    v.push(c.point_estimate.to_string());
                    v.push(opt(c.uncertainty));
                    v.push(opt(c.ci_lower));
                    v.push(opt(c.ci_upper));
                }
                v.push(significance_label(r.significance, r.rank).into());
                v
            })
            .collect();
        csv_text(header, &cols, &rows)
    }

    pub fn to_json(&self, header: &RunHeader) -> String {
        let v = serde_json::json!({ "meta": header, "leaderboard": self });
        serde_json::to_string_pretty(&v).expect("serialisable") + "\n"
    }

    pub fn to_markdown(&self, header: &RunHeader) -> String {
        let mut s = String::from("# Leaderboard\n\n");
        s.push_str(&header.markdown_block());
        let _ = writeln!(s, "- sort_key: {} (best first)", self.sort_key);
        let _ = writeln!(
            s,
            "- uncertainty: {}",
            match self.uncertainty_display {
                UncertaintyDisplay::Std => "bootstrap standard deviation",
                UncertaintyDisplay::HalfWidth => "half-width of the bootstrap percentile interval",
            }
        );
        s.push('\n');
        let mut cols: Vec<String> = vec!["Rank".into(), "Model".into()];
        cols.extend(EFFICIENCY_HEADERS.iter().map(|h| h.to_string()));
        cols.extend(self.metrics.iter().map(|m| Metric::from_name(m).map(|m| m.label()).unwrap_or(m).to_string()));
        cols.push(format!("Significance vs rank 1 ({})", self.sort_key));
        s.push_str(&md_row(&cols));
        s.push_str(&md_row(&vec!["---".to_string(); cols.len()]));
        for r in &self.rows {
            let mut v = vec![
                r.rank.to_string(),
                r.name.clone(),
                r.efficiency_display.params_m.clone(),
                r.efficiency_display.peak_memory_gb.clone(),
                r.efficiency_display.mean_latency_ms.clone(),
                r.efficiency_display.throughput_sps.clone(),
            ];
            v.extend(r.cells.iter().map(|c| c.display.clone()));
            v.push(significance_label(r.significance, r.rank).into());
            s.push_str(&md_row(&v));
        }
        s
    }
}

fn md_row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

/// Three significant digits, the precision of the comparison tables.
pub fn sig3(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.3}");
    }
    let decimals = (2 - v.abs().log10().floor() as i32).max(0) as usize;
    format!("{v:.decimals$}")
}

pub const DUAL_METRICS: [Metric; 4] = [Metric::Mae, Metric::Rmse, Metric::RelL2, Metric::R2];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualResolutionRow {
    pub model: String,
    /// In [`DUAL_METRICS`] order.
    pub subsampled: [f64; 4],
    pub full_mesh: [f64; 4],
    /// `(full − sub) / sub` on rel_l2, percent.
    pub degradation_pct: f64,
}

/// Pairs subsampled and full-mesh records by model name; rows sorted by
/// subsampled rel_l2, best first.
pub fn dual_resolution_table(
    subsampled: &[EvaluationRecord],
    full_mesh: &[EvaluationRecord],
) -> Result<Vec<DualResolutionRow>, ReportError> {
    if subsampled.is_empty() {
        return Err(ReportError::NoModels);
    }
    let mut rows = Vec::new();
    for s in subsampled {
        let f = full_mesh
            .iter()
            .find(|f| f.model_name == s.model_name)
            .ok_or_else(|| ReportError::MissingPair(s.model_name.clone()))?;
        let sub = DUAL_METRICS.map(|m| s.get(m));
        let full = DUAL_METRICS.map(|m| f.get(m));
        rows.push(DualResolutionRow {
            model: s.model_name.clone(),
            subsampled: sub,
            full_mesh: full,
            degradation_pct: (full[2] - sub[2]) / sub[2] * 100.0,
        });
    }
    if let Some(f) = full_mesh.iter().find(|f| !subsampled.iter().any(|s| s.model_name == f.model_name)) {
        return Err(ReportError::MissingPair(f.model_name.clone()));
    }
    rows.sort_by(|a, b| a.subsampled[2].total_cmp(&b.subsampled[2]).then_with(|| a.model.cmp(&b.model)));
    Ok(rows)
}

pub fn dual_resolution_csv(rows: &[DualResolutionRow], header: &RunHeader) -> String {
    let mut cols = vec!["model".to_string()];
    for m in DUAL_METRICS {
        let label = m.label();
        cols.push(format!("{label} subsampled"));
        cols.push(format!("{label} full"));
    }
    cols.push("Rel L2 degradation (%)".into());
    for m in DUAL_METRICS {
        cols.push(format!("{} subsampled value ({})", m.name(), m.unit()));
        cols.push(format!("{} full_mesh value ({})", m.name(), m.unit()));
    }
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.model.clone()];
            for k in 0..4 {
                v.push(sig3(r.subsampled[k]));
                v.push(sig3(r.full_mesh[k]));
            }
            v.push(format!("{:.1}", r.degradation_pct));
            for k in 0..4 {
                v.push(r.subsampled[k].to_string());
                v.push(r.full_mesh[k].to_string());
            }
            v
        })
        .collect();
    csv_text(header, &cols, &body)
}

/// `"0.136 → 0.291"` style cells.
pub fn dual_resolution_markdown(rows: &[DualResolutionRow], header: &RunHeader) -> String {
    let mut s = String::from("# Subsampled vs full-mesh evaluation\n\n");
    s.push_str(&header.markdown_block());
    s.push('\n');
    let mut cols = vec!["Model".to_string()];
    cols.extend(DUAL_METRICS.iter().map(|m| format!("{} subsampled → full mesh", m.label())));
    cols.push("Rel L2 degradation (%)".into());
    s.push_str(&md_row(&cols));
    s.push_str(&md_row(&vec!["---".to_string(); cols.len()]));
    for r in rows {
        let mut v = vec![r.model.clone()];
        v.extend((0..4).map(|k| format!("{} → {}", sig3(r.subsampled[k]), sig3(r.full_mesh[k]))));
        v.push(format!("{:.1}", r.degradation_pct));
        s.push_str(&md_row(&v));
    }
    s
}

/// One train/test category combination of the cross-category matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCatRow {
    pub train_categories: String,
    pub test_categories: String,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub ratio: f64,
    /// model → (rel_l2, r2)
    pub results: BTreeMap<String, (f64, f64)>,
}

pub fn crosscat_csv(rows: &[CrossCatRow], header: &RunHeader) -> String {
    let models: Vec<String> = {
        let mut m: Vec<String> = rows.iter().flat_map(|r| r.results.keys().cloned()).collect();
        m.sort();
        m.dedup();
        m
    };
    let mut cols = vec!["train categories".to_string(), "test categories".to_string()];
    for m in &models {
        cols.push(format!("{m} Rel L2 (dimensionless)"));
    }
    for m in &models {
        cols.push(format!("{m} R² (dimensionless)"));
    }
    cols.extend(["train size (designs)", "val size (designs)", "test size (designs)", "ratio (train/test)"].map(String::from));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.train_categories.clone(), r.test_categories.clone()];
            for m in &models {
                v.push(r.results.get(m).map(|x| format!("{:.4}", x.0)).unwrap_or_else(|| MISSING.into()));
            }
            for m in &models {
                v.push(r.results.get(m).map(|x| format!("{:.4}", x.1)).unwrap_or_else(|| MISSING.into()));
            }
            v.extend([r.train_size.to_string(), r.val_size.to_string(), r.test_size.to_string(), format!("{:.2}", r.ratio)]);
            v
        })
        .collect();
    csv_text(header, &cols, &body)
}

/// Median relative error and absolute-error percentiles per model.
pub fn percentile_csv(records: &[EvaluationRecord], header: &RunHeader) -> String {
    let metrics = [Metric::MedianRelError, Metric::P50, Metric::P90, Metric::P95, Metric::P99];
    debug_assert_eq!(PERCENTILE_LEVELS.len(), 4);
    let mut order: Vec<&EvaluationRecord> = records.iter().collect();
    order.sort_by(|a, b| a.rel_l2.total_cmp(&b.rel_l2).then_with(|| a.model_name.cmp(&b.model_name)));
    let mut cols = vec!["model".to_string()];
    cols.extend(metrics.iter().map(|m| m.label().to_string()));
    let body: Vec<Vec<String>> = order
        .iter()
        .map(|r| {
            let mut v = vec![r.model_name.clone()];
            v.push(format!("{:.4}", r.median_rel_error));
            v.extend(metrics[1..].iter().map(|&m| format!("{:.2}", r.get(m))));
            v
        })
        .collect();
    csv_text(header, &cols, &body)
}

/// PCA coordinates per design plus explained variance in the header.
pub fn pca_csv(ids: &[(String, String)], result: &pca::PcaResult, header: &RunHeader) -> String {
    let mut h = header.clone();
    for (k, r) in result.explained_variance_ratio.iter().enumerate() {
        h = h.with(&format!("pc{}_explained_variance_ratio", k + 1), format!("{r:.6}"));
    }
    let mut cols = vec!["design_id".to_string(), "category".to_string()];
    cols.extend((1..=result.components.len()).map(|k| format!("pc{k} (dimensionless)")));
    let body: Vec<Vec<String>> = ids
        .iter()
        .zip(&result.coordinates)
        .map(|((id, cat), c)| {
            let mut v = vec![id.clone(), cat.clone()];
            v.extend(c.iter().map(|x| format!("{x:.9}")));
            v
        })
        .collect();
    csv_text(&h, &cols, &body)
}

/// Writes `contents`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<(), ReportError> {
    let io = |source| ReportError::Io { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, contents).map_err(io)
}

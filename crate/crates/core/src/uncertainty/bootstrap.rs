//! Stratified paired bootstrap over whole designs.
//!
//! Each replicate redraws the test designs with replacement (independently
//! within each category stratum, keeping the stratum sizes), pools the
//! points of the drawn designs (a design drawn k times contributes k
//! copies) and evaluates the metric on the pool. Bounds are read from the
//! sorted replicates at `⌊(α/2)B⌋` and `⌊(1−α/2)B⌋` without interpolation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gum::{gum_round, GumDisplay};
use super::UncertaintyError;
use crate::mesh::Category;
use crate::metrics::{ErrorSums, Metric, MetricError, PairedField, MEDIAN_REL_EPSILON};
use crate::numeric::{quantile_sorted, CompensatedSum};
use crate::rng;

/// Unit of resampling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleUnit {
    /// Whole designs (the standard protocol).
    #[default]
    Design,
    /// Individual (truth, prediction) pairs from the pooled test points.
    Point,
}

/// Which spread the `±` in display strings denotes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyDisplay {
    #[default]
    Std,
    HalfWidth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub confidence: f64,
    pub master_seed: u64,
    pub stratify_by_category: bool,
    pub resample: ResampleUnit,
    pub display: UncertaintyDisplay,
    /// Replicate arrays are kept when `replicates * metrics` is at most this.
    pub store_replicates_cap: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 2000,
            confidence: 0.95,
            master_seed: 0,
            stratify_by_category: true,
            resample: ResampleUnit::Design,
            display: UncertaintyDisplay::Std,
            store_replicates_cap: 1_000_000,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<(), UncertaintyError> {
        if self.replicates < 100 {
            return Err(UncertaintyError::InvalidConfig(format!(
                "replicates must be at least 100, got {}",
                self.replicates
            )));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(UncertaintyError::InvalidConfig(format!(
                "confidence must lie in (0, 1), got {}",
                self.confidence
            )));
        }
        Ok(())
    }
}

/// Result of resampling one metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub metric: String,
    /// Metric on the original test set.
    pub point_estimate: f64,
    /// Mean of the replicates.
    pub mean: f64,
    /// Replicate standard deviation (B − 1 denominator).
    pub std: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub confidence: f64,
    pub n_replicates: usize,
    /// Replicate values in replicate order, when stored.
    pub replicates: Option<Vec<f64>>,
    pub display: String,
}

impl BootstrapSummary {
    /// Summary carrying only an interval; used for comparing published
    /// intervals.
    pub fn from_interval(metric: &str, lower: f64, upper: f64) -> Self {
        let mid = 0.5 * (lower + upper);
        BootstrapSummary {
            metric: metric.to_string(),
            point_estimate: mid,
            mean: mid,
            std: 0.0,
            ci_lower: lower,
            ci_upper: upper,
            confidence: 0.95,
            n_replicates: 0,
            replicates: None,
            display: gum_round(mid, 0.5 * (upper - lower)).to_string(),
        }
    }

    /// Summary for a `mean ± half_width` interval.
    pub fn from_half_width(metric: &str, mean: f64, half_width: f64) -> Self {
        Self::from_interval(metric, mean - half_width, mean + half_width)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_upper - self.ci_lower)
    }

    /// Spread selected for display.
    pub fn uncertainty(&self, display: UncertaintyDisplay) -> f64 {
        match display {
            UncertaintyDisplay::Std => self.std,
            UncertaintyDisplay::HalfWidth => self.half_width(),
        }
    }

    pub fn gum(&self, display: UncertaintyDisplay) -> GumDisplay {
        gum_round(self.mean, self.uncertainty(display))
    }
}

/// Zero-based indices of the lower and upper bound in `B` sorted replicates.
pub fn ci_indices(replicates: usize, confidence: f64) -> (usize, usize) {
    let alpha = 1.0 - confidence;
    let b = replicates as f64;
    // tiny slack so that e.g. 0.975 * 2000 lands on 1950, not 1949
    let lo = (0.5 * alpha * b + 1e-9).floor() as usize;
    let hi = ((1.0 - 0.5 * alpha) * b + 1e-9).floor() as usize;
    (lo.min(replicates - 1), hi.min(replicates - 1))
}

/// Per-design data prepared once and shared by all resampled metrics.
#[derive(Debug, Clone)]
pub struct BootstrapData<'a> {
    designs: Vec<&'a PairedField>,
    sums: Vec<ErrorSums>,
    /// Design indices per stratum, strata in `Category::ALL` order.
    strata: Vec<(Category, Vec<usize>)>,
}

impl<'a> BootstrapData<'a> {
    /// Designs are ordered by id so results do not depend on input order.
    pub fn new(designs: &'a [PairedField]) -> Result<Self, UncertaintyError> {
        if designs.len() < 2 {
            return Err(UncertaintyError::TooFewDesigns(designs.len()));
        }
        let mut designs: Vec<&PairedField> = designs.iter().collect();
        designs.sort_by(|a, b| a.design_id.cmp(&b.design_id));
        let sums = designs
            .par_iter()
            .map(|d| ErrorSums::from_pairs(&d.truth, &d.prediction))
            .collect::<Result<Vec<_>, MetricError>>()?;
        let strata = Category::ALL
            .iter()
            .map(|&c| (c, (0..designs.len()).filter(|&i| designs[i].category == c).collect::<Vec<_>>()))
            .filter(|(_, v)| !v.is_empty())
            .collect();
        Ok(BootstrapData { designs, sums, strata })
    }

    pub fn n_designs(&self) -> usize {
        self.designs.len()
    }

    pub fn design_ids(&self) -> Vec<&str> {
        self.designs.iter().map(|d| d.design_id.as_str()).collect()
    }

    pub fn category_of(&self, index: usize) -> Category {
        self.designs[index].category
    }

    /// Design-count per stratum, in stratum order.
    pub fn stratum_sizes(&self) -> Vec<(Category, usize)> {
        self.strata.iter().map(|(c, v)| (*c, v.len())).collect()
    }

    /// Design indices drawn for replicate `b` (zero-based) under `config`.
    pub fn replicate_draws(&self, config: &BootstrapConfig, b: usize) -> Vec<usize> {
        let mut rng = rng::indexed_stream(config.master_seed, b as u64);
        let n = self.designs.len();
        if config.stratify_by_category {
            let mut draws = Vec::with_capacity(n);
            for (_, members) in &self.strata {
                for _ in 0..members.len() {
                    draws.push(members[rng.gen_range(0..members.len() as u64) as usize]);
                }
            }
            debug_assert!(self.strata.iter().all(|(c, members)| {
                draws.iter().filter(|&&i| self.designs[i].category == *c).count() == members.len()
            }));
            draws
        } else {
            (0..n).map(|_| rng.gen_range(0..n as u64) as usize).collect()
        }
    }

    /// Metric over the pooled points of `draws` (with multiplicity).
    pub fn metric_on_draws(&self, metric: Metric, draws: &[usize]) -> Result<f64, MetricError> {
        if metric.needs_points() {
            let total: usize = draws.iter().map(|&i| self.designs[i].truth.len()).sum();
            let mut vals = Vec::with_capacity(total);
            for &i in draws {
                let d = self.designs[i];
                for (t, p) in d.truth.iter().zip(&d.prediction) {
                    let e = (p - t).abs();
                    vals.push(if metric == Metric::MedianRelError { e / (t.abs() + MEDIAN_REL_EPSILON) } else { e });
                }
            }
            if vals.is_empty() {
                return Err(MetricError::EmptyInput);
            }
            vals.sort_unstable_by(f64::total_cmp);
            let q = match metric {
                Metric::MedianRelError | Metric::P50 => 0.5,
                Metric::P90 => 0.9,
                Metric::P95 => 0.95,
                _ => 0.99,
            };
            Ok(quantile_sorted(&vals, q))
        } else {
            let mut pooled = ErrorSums::default();
            for &i in draws {
                pooled.merge(&self.sums[i]);
            }
            metric.from_sums(&pooled)
        }
    }

    pub fn point_estimate(&self, metric: Metric) -> Result<f64, MetricError> {
        let all: Vec<usize> = (0..self.designs.len()).collect();
        self.metric_on_draws(metric, &all)
    }

    fn point_replicate(&self, metric: Metric, config: &BootstrapConfig, b: usize) -> Result<f64, MetricError> {
        let mut rng = rng::indexed_stream(config.master_seed, b as u64);
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        let groups: Vec<Vec<usize>> = if config.stratify_by_category {
            self.strata.iter().map(|(_, m)| m.clone()).collect()
        } else {
            vec![(0..self.designs.len()).collect()]
        };
        for group in groups {
            let t: Vec<f64> = group.iter().flat_map(|&i| self.designs[i].truth.iter().copied()).collect();
            let p: Vec<f64> = group.iter().flat_map(|&i| self.designs[i].prediction.iter().copied()).collect();
            for _ in 0..t.len() {
                let k = rng.gen_range(0..t.len() as u64) as usize;
                truth.push(t[k]);
                pred.push(p[k]);
            }
        }
        metric.compute(&truth, &pred)
    }
}

/// Summarises replicate values into mean, std and percentile bounds.
fn summarize(metric: Metric, point_estimate: f64, replicates: Vec<f64>, confidence: f64, keep: bool, display: UncertaintyDisplay) -> BootstrapSummary {
    let b = replicates.len();
    let mean = replicates.iter().copied().collect::<CompensatedSum>().value() / b as f64;
    let var = replicates.iter().map(|v| (v - mean) * (v - mean)).collect::<CompensatedSum>().value()
        / (b.max(2) - 1) as f64;
    let mut sorted = replicates.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let (lo, hi) = ci_indices(b, confidence);
    let mut s = BootstrapSummary {
        metric: metric.name().to_string(),
        point_estimate,
        mean,
        std: var.sqrt(),
        ci_lower: sorted[lo],
        ci_upper: sorted[hi],
        confidence,
        n_replicates: b,
        replicates: keep.then_some(replicates),
        display: String::new(),
    };
    s.display = s.gum(display).to_string();
    s
}

/// Bootstraps `metric` with replicate draws supplied by the caller.
///
/// `draws[b]` lists the design indices (into [`BootstrapData`]'s id order)
/// of replicate `b`. Used to replay a fixed sequence of draws.
pub fn bootstrap_from_draws(
    data: &BootstrapData<'_>,
    metric: Metric,
    draws: &[Vec<usize>],
    confidence: f64,
) -> Result<BootstrapSummary, UncertaintyError> {
    if draws.is_empty() {
        return Err(UncertaintyError::InvalidConfig("no replicates".into()));
    }
    let values = draws
        .iter()
        .map(|d| data.metric_on_draws(metric, d))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(metric, data.point_estimate(metric)?, values, confidence, true, UncertaintyDisplay::Std))
}

/// Runs the bootstrap for one metric. Replicate `b` draws from its own
/// substream of `config.master_seed`, so results are bit-identical for any
/// thread count.
pub fn bootstrap_metric(
    data: &BootstrapData<'_>,
    metric: Metric,
    config: &BootstrapConfig,
) -> Result<BootstrapSummary, UncertaintyError> {
    config.validate()?;
    let values = (0..config.replicates)
        .into_par_iter()
        .map(|b| match config.resample {
            ResampleUnit::Design => data.metric_on_draws(metric, &data.replicate_draws(config, b)),
            ResampleUnit::Point => data.point_replicate(metric, config, b),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let keep = config.replicates <= config.store_replicates_cap;
    Ok(summarize(metric, data.point_estimate(metric)?, values, config.confidence, keep, config.display))
}

//! Error metrics in physical units.
//!
//! Every metric is a function of the pooled `(truth, prediction)` pairs.
//! The moment-type metrics (MAE, MSE, RMSE, R², relative L1/L2, max error)
//! reduce to a handful of sums, [`ErrorSums`], which merge exactly across
//! designs; the quantile-type metrics need the pooled error array itself.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::Category;
use crate::numeric::{quantile_sorted, CompensatedSum, Moments};

/// Denominator guard for the per-point relative error, m²/s².
pub const MEDIAN_REL_EPSILON: f64 = 1e-8;

/// Percentile levels reported for the absolute error.
pub const PERCENTILE_LEVELS: [f64; 4] = [50.0, 90.0, 95.0, 99.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("truth has {truth} values, prediction has {prediction}")]
    LengthMismatch { truth: usize, prediction: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("truth is constant; R² is undefined")]
    ZeroVarianceTruth,
    #[error("truth has zero norm; relative error is undefined")]
    ZeroNormTruth,
    #[error("no prediction for design '{0}'")]
    MissingPrediction(String),
    #[error("design '{design}': truth has {truth} values, prediction has {prediction}")]
    DesignLengthMismatch { design: String, truth: usize, prediction: usize },
}

fn check(y: &[f64], yhat: &[f64]) -> Result<(), MetricError> {
    if y.len() != yhat.len() {
        return Err(MetricError::LengthMismatch { truth: y.len(), prediction: yhat.len() });
    }
    if y.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    Ok(())
}

/// Running sums sufficient for the moment-type metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorSums {
    pub n: u64,
    pub abs_err: CompensatedSum,
    pub sq_err: CompensatedSum,
    pub abs_truth: CompensatedSum,
    pub sq_truth: CompensatedSum,
    pub truth: Moments,
    pub max_abs_err: f64,
}

impl ErrorSums {
    pub fn from_pairs(y: &[f64], yhat: &[f64]) -> Result<Self, MetricError> {
        check(y, yhat)?;
        let mut s = ErrorSums::default();
        for (&t, &p) in y.iter().zip(yhat) {
            let e = p - t;
            s.abs_err.add(e.abs());
            s.sq_err.add(e * e);
            s.abs_truth.add(t.abs());
            s.sq_truth.add(t * t);
            s.truth.push(t);
            s.max_abs_err = s.max_abs_err.max(e.abs());
        }
        s.n = y.len() as u64;
        Ok(s)
    }

    pub fn merge(&mut self, other: &ErrorSums) {
        self.n += other.n;
        self.abs_err.merge(&other.abs_err);
        self.sq_err.merge(&other.sq_err);
        self.abs_truth.merge(&other.abs_truth);
        self.sq_truth.merge(&other.sq_truth);
        self.truth.merge(&other.truth);
        self.max_abs_err = self.max_abs_err.max(other.max_abs_err);
    }

    fn nonempty(&self) -> Result<f64, MetricError> {
        if self.n == 0 {
            Err(MetricError::EmptyInput)
        } else {
            Ok(self.n as f64)
        }
    }

    pub fn mae(&self) -> Result<f64, MetricError> {
        Ok(self.abs_err.value() / self.nonempty()?)
    }

    pub fn mse(&self) -> Result<f64, MetricError> {
        Ok(self.sq_err.value() / self.nonempty()?)
    }

    pub fn rmse(&self) -> Result<f64, MetricError> {
        Ok(self.mse()?.sqrt())
    }

    pub fn r2(&self) -> Result<f64, MetricError> {
        self.nonempty()?;
        let ss_tot = self.truth.m2;
        if !(ss_tot > 0.0) {
            return Err(MetricError::ZeroVarianceTruth);
        }
        Ok(1.0 - self.sq_err.value() / ss_tot)
    }

    pub fn rel_l2(&self) -> Result<f64, MetricError> {
        self.nonempty()?;
        let den = self.sq_truth.value();
        if !(den > 0.0) {
            return Err(MetricError::ZeroNormTruth);
        }
        Ok((self.sq_err.value() / den).sqrt())
    }

    pub fn rel_l1(&self) -> Result<f64, MetricError> {
        self.nonempty()?;
        let den = self.abs_truth.value();
        if !(den > 0.0) {
            return Err(MetricError::ZeroNormTruth);
        }
        Ok(self.abs_err.value() / den)
    }

    pub fn max_error(&self) -> Result<f64, MetricError> {
        self.nonempty()?;
        Ok(self.max_abs_err)
    }
}

/// Mean absolute error, m²/s².
pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    ErrorSums::from_pairs(y, yhat)?.mae()
}

/// Mean squared error, m⁴/s⁴.
pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    ErrorSums::from_pairs(y, yhat)?.mse()
}

/// Root mean squared error, m²/s².
pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    ErrorSums::from_pairs(y, yhat)?.rmse()
}

/// Coefficient of determination against the mean of `y`.
pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    ErrorSums::from_pairs(y, yhat)?.r2()
}

/// `‖ŷ − y‖₂ / ‖y‖₂`
pub fn rel_l2(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    ErrorSums::from_pairs(y, yhat)?.rel_l2()
}

/// `Σ|ŷ − y| / Σ|y|`
pub fn rel_l1(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    ErrorSums::from_pairs(y, yhat)?.rel_l1()
}

/// Largest absolute error, m²/s².
pub fn max_error(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    ErrorSums::from_pairs(y, yhat)?.max_error()
}

/// Percentiles (0–100) of the absolute error with linear interpolation
/// between order statistics.
pub fn percentile_errors(y: &[f64], yhat: &[f64], levels: &[f64]) -> Result<Vec<f64>, MetricError> {
    check(y, yhat)?;
    let mut err: Vec<f64> = y.iter().zip(yhat).map(|(t, p)| (p - t).abs()).collect();
    err.sort_unstable_by(f64::total_cmp);
    Ok(levels.iter().map(|l| quantile_sorted(&err, l / 100.0)).collect())
}

/// Median over points of `|ŷ − y| / (|y| + eps)`.
pub fn median_rel_error(y: &[f64], yhat: &[f64], eps: f64) -> Result<f64, MetricError> {
    check(y, yhat)?;
    let mut rel: Vec<f64> = y.iter().zip(yhat).map(|(t, p)| (p - t).abs() / (t.abs() + eps)).collect();
    rel.sort_unstable_by(f64::total_cmp);
    Ok(quantile_sorted(&rel, 0.5))
}

/// Metrics the harness can report and resample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mse,
    Mae,
    Rmse,
    R2,
    RelL2,
    RelL1,
    MaxError,
    MedianRelError,
    P50,
    P90,
    P95,
    P99,
}

impl Metric {
    pub const ALL: [Metric; 12] = [
        Metric::Mse,
        Metric::Mae,
        Metric::Rmse,
        Metric::R2,
        Metric::RelL2,
        Metric::RelL1,
        Metric::MaxError,
        Metric::MedianRelError,
        Metric::P50,
        Metric::P90,
        Metric::P95,
        Metric::P99,
    ];

    /// Columns of the headline leaderboard.
    pub const LEADERBOARD: [Metric; 5] = [Metric::Mse, Metric::Mae, Metric::Rmse, Metric::R2, Metric::RelL2];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Mse => "mse",
            Metric::Mae => "mae",
            Metric::Rmse => "rmse",
            Metric::R2 => "r2",
            Metric::RelL2 => "rel_l2",
            Metric::RelL1 => "rel_l1",
            Metric::MaxError => "max_error",
            Metric::MedianRelError => "median_rel_error",
            Metric::P50 => "p50",
            Metric::P90 => "p90",
            Metric::P95 => "p95",
            Metric::P99 => "p99",
        }
    }

    pub fn from_name(s: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Display label with units, for table headers.
    pub fn label(self) -> &'static str {
        match self {
            Metric::Mse => "MSE (m⁴/s⁴)",
            Metric::Mae => "MAE (m²/s²)",
            Metric::Rmse => "RMSE (m²/s²)",
            Metric::R2 => "R² (dimensionless)",
            Metric::RelL2 => "Rel L2 (dimensionless)",
            Metric::RelL1 => "Rel L1 (dimensionless)",
            Metric::MaxError => "Max Error (m²/s²)",
            Metric::MedianRelError => "Median Rel. Error (dimensionless)",
            Metric::P50 => "P50 Error (m²/s²)",
            Metric::P90 => "P90 Error (m²/s²)",
            Metric::P95 => "P95 Error (m²/s²)",
            Metric::P99 => "P99 Error (m²/s²)",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Metric::Mse => "m4_per_s4",
            Metric::R2 | Metric::RelL2 | Metric::RelL1 | Metric::MedianRelError => "dimensionless",
            _ => "m2_per_s2",
        }
    }

    /// True for metrics that need the pooled point array, not just sums.
    pub fn needs_points(self) -> bool {
        matches!(self, Metric::MedianRelError | Metric::P50 | Metric::P90 | Metric::P95 | Metric::P99)
    }

    /// Whether larger values are better (only R²).
    pub fn higher_is_better(self) -> bool {
        self == Metric::R2
    }

    /// Evaluates a moment-type metric from sums.
    pub fn from_sums(self, s: &ErrorSums) -> Result<f64, MetricError> {
        match self {
            Metric::Mse => s.mse(),
            Metric::Mae => s.mae(),
            Metric::Rmse => s.rmse(),
            Metric::R2 => s.r2(),
            Metric::RelL2 => s.rel_l2(),
            Metric::RelL1 => s.rel_l1(),
            Metric::MaxError => s.max_error(),
            _ => unreachable!("{} needs the point array", self.name()),
        }
    }

    /// Evaluates any metric on explicit pairs.
    pub fn compute(self, y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
        match self {
            Metric::MedianRelError => median_rel_error(y, yhat, MEDIAN_REL_EPSILON),
            Metric::P50 => Ok(percentile_errors(y, yhat, &[50.0])?[0]),
            Metric::P90 => Ok(percentile_errors(y, yhat, &[90.0])?[0]),
            Metric::P95 => Ok(percentile_errors(y, yhat, &[95.0])?[0]),
            Metric::P99 => Ok(percentile_errors(y, yhat, &[99.0])?[0]),
            m => m.from_sums(&ErrorSums::from_pairs(y, yhat)?),
        }
    }
}

/// Evaluation resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Subsampled,
    FullMesh,
}

impl Resolution {
    pub fn name(self) -> &'static str {
        match self {
            Resolution::Subsampled => "subsampled",
            Resolution::FullMesh => "full_mesh",
        }
    }
}

/// Truth and prediction for one design, both in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedField {
    pub design_id: String,
    pub category: Category,
    pub truth: Vec<f64>,
    pub prediction: Vec<f64>,
}

/// Pairs test truths with predictions keyed by design id.
pub fn pair_fields(
    truths: Vec<(String, Category, Vec<f64>)>,
    predictions: &std::collections::BTreeMap<String, Vec<f64>>,
) -> Result<Vec<PairedField>, MetricError> {
    truths
        .into_iter()
        .map(|(design_id, category, truth)| {
            let prediction = predictions
                .get(&design_id)
                .ok_or_else(|| MetricError::MissingPrediction(design_id.clone()))?
                .clone();
            if prediction.len() != truth.len() {
                return Err(MetricError::DesignLengthMismatch {
                    design: design_id,
                    truth: truth.len(),
                    prediction: prediction.len(),
                });
            }
            Ok(PairedField { design_id, category, truth, prediction })
        })
        .collect()
}

/// Per-design metrics retained for resampling and failure analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignMetrics {
    pub design_id: String,
    pub category: Category,
    pub n_points: u64,
    pub mae: f64,
    pub rmse: f64,
    pub rel_l2: Option<f64>,
    pub r2: Option<f64>,
    pub max_error: f64,
    #[serde(skip)]
    pub sums: ErrorSums,
}

/// Pooled metrics for one model on one split at one resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub model_name: String,
    pub split_name: String,
    pub resolution: Resolution,
    pub n_designs: usize,
    pub n_points_total: u64,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub r2: f64,
    pub rel_l2: f64,
    pub rel_l1: f64,
    pub max_error: f64,
    pub median_rel_error: f64,
    pub p50: f64,
    pub p90: f64,
    pub p95: f64,
    pub p99: f64,
    pub per_design: Vec<DesignMetrics>,
}

impl EvaluationRecord {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Mse => self.mse,
            Metric::Mae => self.mae,
            Metric::Rmse => self.rmse,
            Metric::R2 => self.r2,
            Metric::RelL2 => self.rel_l2,
            Metric::RelL1 => self.rel_l1,
            Metric::MaxError => self.max_error,
            Metric::MedianRelError => self.median_rel_error,
            Metric::P50 => self.p50,
            Metric::P90 => self.p90,
            Metric::P95 => self.p95,
            Metric::P99 => self.p99,
        }
    }

    /// JSON view with an explicit unit string next to every metric.
    pub fn to_json(&self) -> serde_json::Value {
        let mut metrics = serde_json::Map::new();
        for m in Metric::ALL {
            metrics.insert(
                m.name().to_string(),
                serde_json::json!({ "value": self.get(m), "unit": m.unit() }),
            );
        }
        serde_json::json!({
            "model_name": self.model_name,
            "split_name": self.split_name,
            "resolution": self.resolution.name(),
            "n_designs": self.n_designs,
            "n_points_total": self.n_points_total,
            "pooling": "points",
            "median_rel_epsilon_m2_per_s2": MEDIAN_REL_EPSILON,
            "metrics": metrics,
            "per_design": self.per_design,
        })
    }
}

/// Scores all designs of a split. Designs are reduced in design-id order,
/// so the result is independent of input order and thread count.
pub fn evaluate(
    model_name: &str,
    split_name: &str,
    resolution: Resolution,
    designs: &[PairedField],
) -> Result<EvaluationRecord, MetricError> {
    use rayon::prelude::*;
    if designs.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mut order: Vec<&PairedField> = designs.iter().collect();
    order.sort_by(|a, b| a.design_id.cmp(&b.design_id));
    for d in &order {
        if d.truth.len() != d.prediction.len() {
            return Err(MetricError::DesignLengthMismatch {
                design: d.design_id.clone(),
                truth: d.truth.len(),
                prediction: d.prediction.len(),
            });
        }
    }
    let per_design: Vec<DesignMetrics> = order
        .par_iter()
        .map(|d| {
            let sums = ErrorSums::from_pairs(&d.truth, &d.prediction)?;
            Ok(DesignMetrics {
                design_id: d.design_id.clone(),
                category: d.category,
                n_points: sums.n,
                mae: sums.mae()?,
                rmse: sums.rmse()?,
                rel_l2: sums.rel_l2().ok(),
                r2: sums.r2().ok(),
                max_error: sums.max_error()?,
                sums,
            })
        })
        .collect::<Result<_, MetricError>>()?;
    let mut pooled = ErrorSums::default();
    for d in &per_design {
        pooled.merge(&d.sums);
    }
    let mut abs_err = Vec::with_capacity(pooled.n as usize);
    let mut rel_err = Vec::with_capacity(pooled.n as usize);
    for d in &order {
        for (t, p) in d.truth.iter().zip(&d.prediction) {
            let e = (p - t).abs();
            abs_err.push(e);
            rel_err.push(e / (t.abs() + MEDIAN_REL_EPSILON));
        }
    }
    abs_err.par_sort_unstable_by(f64::total_cmp);
    rel_err.par_sort_unstable_by(f64::total_cmp);
    let pct = |l: f64| quantile_sorted(&abs_err, l / 100.0);
    Ok(EvaluationRecord {
        model_name: model_name.to_string(),
        split_name: split_name.to_string(),
        resolution,
        n_designs: designs.len(),
        n_points_total: pooled.n,
        mae: pooled.mae()?,
        mse: pooled.mse()?,
        rmse: pooled.rmse()?,
        r2: pooled.r2()?,
        rel_l2: pooled.rel_l2()?,
        rel_l1: pooled.rel_l1()?,
        max_error: pooled.max_error()?,
        median_rel_error: quantile_sorted(&rel_err, 0.5),
        p50: pct(50.0),
        p90: pct(90.0),
        p95: pct(95.0),
        p99: pct(99.0),
        per_design,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const Y: [f64; 3] = [1.0, 2.0, 3.0];
    const YH: [f64; 3] = [1.0, 2.0, 4.0];

    #[test]
    fn hand_values() {
        assert!((mae(&Y, &YH).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((mse(&Y, &YH).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((rmse(&Y, &YH).unwrap() - 0.577_350_269_189_625_8).abs() < 1e-15);
        assert!((r2(&Y, &YH).unwrap() - 0.5).abs() < 1e-15);
        assert!((rel_l2(&Y, &YH).unwrap() - 1.0 / 14f64.sqrt()).abs() < 1e-15);
        assert!((rel_l1(&Y, &YH).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(max_error(&Y, &YH).unwrap(), 1.0);
    }

    #[test]
    fn perfect_prediction() {
        let y = [3.0, -1.0, 2.5];
        assert_eq!(mae(&y, &y).unwrap(), 0.0);
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        assert_eq!(rmse(&y, &y).unwrap(), 0.0);
        assert_eq!(r2(&y, &y).unwrap(), 1.0);
        assert_eq!(rel_l2(&y, &y).unwrap(), 0.0);
        assert_eq!(rel_l1(&y, &y).unwrap(), 0.0);
        assert_eq!(max_error(&y, &y).unwrap(), 0.0);
        assert_eq!(median_rel_error(&y, &y, MEDIAN_REL_EPSILON).unwrap(), 0.0);
    }

    #[test]
    fn mean_predictor_has_zero_r2() {
        let y = [1.0, 4.0, 7.0, 10.0];
        assert!(r2(&y, &[5.5; 4]).unwrap().abs() < 1e-15);
        assert_eq!(r2(&[2.0; 3], &[1.0; 3]), Err(MetricError::ZeroVarianceTruth));
    }

    #[test]
    fn error_paths() {
        assert_eq!(mae(&[1.0], &[1.0, 2.0]), Err(MetricError::LengthMismatch { truth: 1, prediction: 2 }));
        assert_eq!(mae(&[], &[]), Err(MetricError::EmptyInput));
        assert_eq!(percentile_errors(&[], &[], &[50.0]), Err(MetricError::EmptyInput));
        assert_eq!(rel_l2(&[0.0], &[1.0]), Err(MetricError::ZeroNormTruth));
    }

    #[test]
    fn percentiles() {
        let y = vec![0.0; 100];
        let yh: Vec<f64> = (0..100).map(f64::from).collect();
        let p = percentile_errors(&y, &yh, &[50.0, 90.0, 99.0]).unwrap();
        assert!((p[0] - 49.5).abs() < 1e-12);
        assert!((p[1] - 89.1).abs() < 1e-12);
        assert!((p[2] - 98.01).abs() < 1e-12);
        let c = percentile_errors(&[1.0, 2.0, 3.0], &[3.5, 4.5, 5.5], &PERCENTILE_LEVELS).unwrap();
        assert!(c.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn median_relative() {
        assert!((median_rel_error(&[2.0, 4.0], &[3.0, 4.0], MEDIAN_REL_EPSILON).unwrap() - 0.25).abs() < 1e-8);
        let v = median_rel_error(&[0.0, 1.0, 2.0], &[1.0, 1.0, 2.0], MEDIAN_REL_EPSILON).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn two_designs_pool_points() {
        let d = vec![
            PairedField { design_id: "b".into(), category: Category::Fastback, truth: vec![1.0, 2.0], prediction: vec![1.5, 2.0] },
            PairedField { design_id: "a".into(), category: Category::Notchback, truth: vec![3.0, -4.0], prediction: vec![2.0, -4.5] },
        ];
        let rec = evaluate("m", "s", Resolution::Subsampled, &d).unwrap();
        let y = [3.0, -4.0, 1.0, 2.0];
        let yh = [2.0, -4.5, 1.5, 2.0];
        assert!((rec.mae - mae(&y, &yh).unwrap()).abs() < 1e-15);
        assert!((rec.r2 - r2(&y, &yh).unwrap()).abs() < 1e-14);
        assert!((rec.rel_l2 - rel_l2(&y, &yh).unwrap()).abs() < 1e-15);
        assert_eq!(rec.p50, percentile_errors(&y, &yh, &[50.0]).unwrap()[0]);
        assert_eq!(rec.n_points_total, 4);
        assert_eq!(rec.per_design[0].design_id, "a");
    }

    #[test]
    fn missing_and_mismatched_predictions() {
        let mut preds = std::collections::BTreeMap::new();
        preds.insert("a".to_string(), vec![1.0]);
        let t = vec![("a".to_string(), Category::Unknown, vec![1.0]), ("b".to_string(), Category::Unknown, vec![1.0])];
        assert_eq!(pair_fields(t.clone(), &preds), Err(MetricError::MissingPrediction("b".into())));
        preds.insert("b".to_string(), vec![1.0, 2.0]);
        assert!(matches!(pair_fields(t, &preds), Err(MetricError::DesignLengthMismatch { .. })));
    }

    fn vecs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..200).prop_flat_map(|n| {
            (prop::collection::vec(-500.0f64..500.0, n), prop::collection::vec(-500.0f64..500.0, n))
        })
    }

    proptest! {
        #[test]
        fn ordering_invariants((y, yh) in vecs()) {
            let s = ErrorSums::from_pairs(&y, &yh).unwrap();
            let p = percentile_errors(&y, &yh, &PERCENTILE_LEVELS).unwrap();
            prop_assert!(s.mae().unwrap() <= s.rmse().unwrap() * (1.0 + 1e-12));
            prop_assert!(p[0] <= p[1] && p[1] <= p[2] && p[2] <= p[3]);
            prop_assert!(s.max_error().unwrap() >= p[3]);
            if let Ok(r) = s.r2() { prop_assert!(r <= 1.0); }
            if let Ok(r) = s.rel_l2() { prop_assert!(r >= 0.0); }
        }

        #[test]
        fn relative_errors_scale_invariant((y, yh) in vecs(), c in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
            let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
            let yhs: Vec<f64> = yh.iter().map(|v| v * c).collect();
            if let (Ok(a), Ok(b)) = (rel_l2(&y, &yh), rel_l2(&ys, &yhs)) {
                prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-300));
            }
            if let (Ok(a), Ok(b)) = (rel_l1(&y, &yh), rel_l1(&ys, &yhs)) {
                prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-300));
            }
        }

        #[test]
        fn evaluate_permutation_invariant(seed in any::<u64>()) {
            use rand::{seq::SliceRandom, Rng};
            let mut rng = crate::rng::stream(seed);
            let designs: Vec<PairedField> = (0..5).map(|i| {
                let n = rng.gen_range(2..30);
                PairedField {
                    design_id: format!("d{i}"),
                    category: Category::Unknown,
                    truth: (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect(),
                    prediction: (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect(),
                }
            }).collect();
            let a = evaluate("m", "s", Resolution::Subsampled, &designs).unwrap();
            let mut shuffled = designs.clone();
            shuffled.shuffle(&mut rng);
            for d in &mut shuffled {
                let mut idx: Vec<usize> = (0..d.truth.len()).collect();
                idx.shuffle(&mut rng);
                d.truth = idx.iter().map(|&i| d.truth[i]).collect();
                d.prediction = idx.iter().map(|&i| d.prediction[i]).collect();
            }
            let b = evaluate("m", "s", Resolution::Subsampled, &shuffled).unwrap();
            for m in Metric::ALL {
                let (x, y) = (a.get(m), b.get(m));
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{}: {} vs {}", m.name(), x, y);
            }
        }
    }
}

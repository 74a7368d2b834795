//! Bootstrap confidence intervals, interval-overlap significance and
//! display rounding.

pub mod bootstrap;
pub mod gum;

pub use bootstrap::{
    bootstrap_from_draws, bootstrap_metric, ci_indices, BootstrapConfig, BootstrapData, BootstrapSummary,
    ResampleUnit, UncertaintyDisplay,
};
pub use gum::{gum_round, gum_round_column, GumDisplay};

use serde::Serialize;
use thiserror::Error;

use crate::mesh::Category;
use crate::metrics::MetricError;

#[derive(Debug, Error, PartialEq)]
pub enum UncertaintyError {
    #[error("bootstrap needs at least 2 designs, got {0}")]
    TooFewDesigns(usize),
    #[error("stratum {0} has no designs")]
    EmptyCategory(Category),
    #[error("invalid bootstrap configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot compare intervals of '{0}' and '{1}'")]
    MetricMismatch(String, String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Significance {
    Separated,
    Overlapping,
}

/// `Separated` iff the two confidence intervals are disjoint.
pub fn significance_by_overlap(a: &BootstrapSummary, b: &BootstrapSummary) -> Result<Significance, UncertaintyError> {
    if a.metric != b.metric {
        return Err(UncertaintyError::MetricMismatch(a.metric.clone(), b.metric.clone()));
    }
    Ok(if a.ci_upper < b.ci_lower || b.ci_upper < a.ci_lower {
        Significance::Separated
    } else {
        Significance::Overlapping
    })
}

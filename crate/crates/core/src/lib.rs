//! Evaluation harness for surface-pressure surrogates of automotive CFD.
//!
//! Models are treated as black boxes behind a file-based adapter protocol;
//! the harness owns everything around them: mesh ingestion, train-only
//! normalisation, seeded vertex subsampling, physical-unit metrics at the
//! subsampled and full-mesh resolution, stratified bootstrap intervals with
//! GUM-style display rounding, pressure-drag sanity checks, efficiency
//! profiling and deterministic report emission.

pub mod adapter;
pub mod binio;
pub mod config;
pub mod dataset;
pub mod geom;
pub mod mesh;
pub mod metrics;
pub mod numeric;
pub mod physics;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod sampling;
pub mod synth;
pub mod uncertainty;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/running.md")]
    mod running {}
    #[doc = include_str!("../../../book/src/meshes.md")]
    mod meshes {}
    #[doc = include_str!("../../../book/src/splits.md")]
    mod splits {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/uncertainty.md")]
    mod uncertainty {}
    #[doc = include_str!("../../../book/src/physics.md")]
    mod physics {}
    #[doc = include_str!("../../../book/src/adapters.md")]
    mod adapters {}
    #[doc = include_str!("../../../book/src/reports.md")]
    mod reports {}
}

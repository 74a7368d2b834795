//! Design-space PCA over coordinate-histogram descriptors.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::mesh::SurfaceMesh;
use crate::rng;

pub const HISTOGRAM_BINS: usize = 64;
pub const DESCRIPTOR_DIM: usize = 3 * HISTOGRAM_BINS;
pub const DESCRIPTOR_VERSION: &str = "coord-histogram-v1 (3 axes x 64 bins, bounding-box normalized, fractions)";
pub const POWER_TOLERANCE: f64 = 1e-10;
pub const POWER_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum PcaError {
    #[error("{designs} designs cannot support {components} components (need at least 3 and at least one per component)")]
    RankDeficient { designs: usize, components: usize },
    #[error("power iteration for component {0} did not converge")]
    NoConvergence(usize),
    #[error("feature vectors have inconsistent lengths")]
    RaggedFeatures,
}

/// Per-axis histograms of vertex coordinates after mapping the bounding box
/// to the unit cube; each axis histogram sums to 1. Mesh size does not
/// matter, only the distribution of vertices.
pub fn coordinate_histogram(mesh: &SurfaceMesh) -> Vec<f64> {
    let mut h = vec![0.0; DESCRIPTOR_DIM];
    let Some((lo, hi)) = mesh.bounds() else {
        return h;
    };
    let n = mesh.n_points() as f64;
    for v in &mesh.vertices {
        for axis in 0..3 {
            let span = hi[axis] - lo[axis];
            let t = if span > 0.0 { (v[axis] - lo[axis]) / span } else { 0.5 };
            let bin = ((t * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
            h[axis * HISTOGRAM_BINS + bin] += 1.0 / n;
        }
    }
    h
}

pub fn coordinate_histograms(meshes: &[SurfaceMesh]) -> Vec<Vec<f64>> {
    meshes.par_iter().map(coordinate_histogram).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaResult {
    /// One row per design, `n_components` columns.
    pub coordinates: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// Eigenvalue over the total variance (trace of the covariance).
    pub explained_variance_ratio: Vec<f64>,
    /// Unit loadings, first non-zero entry positive.
    pub components: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub iterations: Vec<usize>,
}

/// Projects mean-centred features onto the leading eigenvectors of their
/// sample covariance, found one at a time by power iteration and deflation.
pub fn pca_projection(features: &[Vec<f64>], n_components: usize) -> Result<PcaResult, PcaError> {
    let n = features.len();
    if n < 3 || n < n_components {
        return Err(PcaError::RankDeficient { designs: n, components: n_components });
    }
    let d = features[0].len();
    if features.iter().any(|f| f.len() != d) {
        return Err(PcaError::RaggedFeatures);
    }
    let mut mean = vec![0.0; d];
    for f in features {
        for (m, x) in mean.iter_mut().zip(f) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centred: Vec<Vec<f64>> = features.iter().map(|f| f.iter().zip(&mean).map(|(x, m)| x - m).collect()).collect();

    let mut cov = vec![vec![0.0; d]; d];
    for row in &centred {
        for i in 0..d {
            if row[i] == 0.0 {
                continue;
            }
            for j in i..d {
                cov[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    let trace: f64 = (0..d).map(|i| cov[i][i]).sum();

    let mut components = Vec::new();
    let mut eigenvalues = Vec::new();
    let mut iterations = Vec::new();
    let mut start_rng = rng::stream(0x5ca1_ab1e);
    for k in 0..n_components {
        let mut v: Vec<f64> = (0..d).map(|_| start_rng.gen_range(-1.0..1.0)).collect();
        orthonormalize(&mut v, &components);
        let (mut lambda, mut converged, mut iters) = (0.0, false, 0);
        for it in 1..=POWER_MAX_ITERATIONS {
            iters = it;
            let mut w = mat_vec(&cov, &v);
            lambda = dot(&w, &v);
            let norm = dot(&w, &w).sqrt();
            if norm <= 1e-14 * trace.max(f64::MIN_POSITIVE) {
                // remaining spectrum is numerically zero
                lambda = 0.0;
                converged = true;
                break;
            }
            w.iter_mut().for_each(|x| *x /= norm);
            orthonormalize(&mut w, &components);
            let change = w.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            v = w;
            if change < POWER_TOLERANCE {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(PcaError::NoConvergence(k));
        }
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        for i in 0..d {
            for j in 0..d {
                cov[i][j] -= lambda * v[i] * v[j];
            }
        }
        eigenvalues.push(lambda.max(0.0));
        components.push(v);
        iterations.push(iters);
    }

    let coordinates = centred.iter().map(|row| components.iter().map(|c| dot(row, c)).collect()).collect();
    let explained_variance_ratio =
        eigenvalues.iter().map(|l| if trace > 0.0 { l / trace } else { 0.0 }).collect();
    Ok(PcaResult { coordinates, eigenvalues, explained_variance_ratio, components, mean, iterations })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Gram–Schmidt against `basis`, then unit length.
fn orthonormalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let p = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
    }
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

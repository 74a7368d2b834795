//! Seeded vertex subsampling and nearest-neighbour transfer back to the
//! full mesh.

pub mod kdtree;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kdtree::KdTree;

use crate::geom::Vec3;
use crate::mesh::SurfaceMesh;
use crate::rng;

/// Standard subsample size.
pub const DEFAULT_SAMPLE_SIZE: usize = 10_000;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("cannot draw {requested} samples from a mesh with {available} vertices")]
    SampleLargerThanMesh { requested: usize, available: usize },
    #[error("design '{design}' has no point field '{field}'")]
    MissingField { design: String, field: String },
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("point set is empty")]
    EmptyPointSet,
}

/// How vertices are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Uniform over vertices without replacement (the evaluation protocol).
    #[default]
    Uniform,
    /// Without replacement, probability proportional to each vertex's
    /// share (one third) of its incident face areas.
    AreaWeighted,
}

/// A seeded subsample of one design's vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub design_id: String,
    pub indices: Vec<u32>,
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
    /// Ground truth at the sampled vertices, m²/s².
    pub truth: Vec<f64>,
    pub seed: u64,
}

impl SampleSet {
    pub fn n(&self) -> usize {
        self.indices.len()
    }
}

/// Draws `n` distinct vertices of `mesh` and gathers positions, normals and
/// the `field` values at them.
///
/// The draw is a partial Fisher–Yates shuffle driven by the design's
/// substream (`seed XOR fnv1a64(design_id)`), so it depends only on
/// `(seed, design_id, n, vertex count)`.
pub fn sample_vertices(mesh: &SurfaceMesh, field: &str, n: usize, seed: u64) -> Result<SampleSet, SamplingError> {
    sample_vertices_with(mesh, field, n, seed, SamplingMode::Uniform)
}

pub fn sample_vertices_with(
    mesh: &SurfaceMesh,
    field: &str,
    n: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<SampleSet, SamplingError> {
    let total = mesh.n_points();
    if n > total {
        return Err(SamplingError::SampleLargerThanMesh { requested: n, available: total });
    }
    let values = mesh.field(field).ok_or_else(|| SamplingError::MissingField {
        design: mesh.design_id.clone(),
        field: field.to_string(),
    })?;
    let mut rng = rng::design_stream(seed, &mesh.design_id);
    let indices: Vec<u32> = match mode {
        SamplingMode::Uniform => {
            let mut perm: Vec<u32> = (0..total as u32).collect();
            for i in 0..n {
                let j = i + rng.gen_range(0..(total - i) as u64) as usize;
                perm.swap(i, j);
            }
            perm.truncate(n);
            perm
        }
        SamplingMode::AreaWeighted => {
            let mut weight = vec![0.0; total];
            for f in 0..mesh.n_cells() {
                let a = mesh.face_area(f) / 3.0;
                for &v in &mesh.triangles[f] {
                    weight[v as usize] += a;
                }
            }
            // Efraimidis–Spirakis: keep the n largest u^(1/w)
            let mut keyed: Vec<(f64, u32)> = (0..total)
                .map(|i| {
                    let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                    let key = if weight[i] > 0.0 { u.ln() / weight[i] } else { f64::NEG_INFINITY };
                    (key, i as u32)
                })
                .collect();
            keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            keyed.into_iter().take(n).map(|(_, i)| i).collect()
        }
    };
    let normals_all = mesh.vertex_normals();
    Ok(SampleSet {
        design_id: mesh.design_id.clone(),
        points: indices.iter().map(|&i| mesh.vertices[i as usize]).collect(),
        normals: Some(indices.iter().map(|&i| normals_all[i as usize]).collect()),
        truth: indices.iter().map(|&i| values[i as usize]).collect(),
        indices,
        seed,
    })
}

/// Builds a k-d tree over `points`.
pub fn build_index(points: &[Vec3]) -> Result<KdTree, SamplingError> {
    KdTree::build(points.to_vec()).ok_or(SamplingError::EmptyPointSet)
}

/// Transfers predictions made at the sampled vertices to every vertex of
/// the mesh by 1-nearest-neighbour selection. Sampled vertices keep their
/// own prediction exactly.
pub fn interpolate_to_full(mesh: &SurfaceMesh, sample: &SampleSet, predictions: &[f64]) -> Result<Vec<f64>, SamplingError> {
    use rayon::prelude::*;
    if predictions.len() != sample.n() {
        return Err(SamplingError::LengthMismatch { expected: sample.n(), found: predictions.len() });
    }
    let tree = build_index(&sample.points)?;
    let mut own: Vec<Option<f64>> = vec![None; mesh.n_points()];
    for (k, &i) in sample.indices.iter().enumerate() {
        own[i as usize] = Some(predictions[k]);
    }
    Ok(mesh
        .vertices
        .par_iter()
        .zip(own.par_iter())
        .map(|(v, own)| own.unwrap_or_else(|| predictions[tree.nearest(*v).0]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    fn sphere_with_field(subdiv: u32) -> SurfaceMesh {
        let mut m = shapes::icosphere(1.0, subdiv);
        m.design_id = "F_sphere".into();
        let p = m.vertices.iter().map(|v| 10.0 * v[0] + v[1] * v[2]).collect();
        m.set_field("p", p).unwrap();
        m
    }

    #[test]
    fn full_draw_is_permutation() {
        let m = sphere_with_field(2);
        let s = sample_vertices(&m, "p", m.n_points(), 5).unwrap();
        let mut idx = s.indices.clone();
        idx.sort();
        assert_eq!(idx, (0..m.n_points() as u32).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let m = sphere_with_field(3);
        let a = sample_vertices(&m, "p", 100, 42).unwrap();
        let b = sample_vertices(&m, "p", 100, 42).unwrap();
        let c = sample_vertices(&m, "p", 100, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.indices, c.indices);
        let mut renamed = m.clone();
        renamed.design_id = "F_other".into();
        assert_ne!(sample_vertices(&renamed, "p", 100, 42).unwrap().indices, a.indices);
    }

    #[test]
    fn truth_and_normals_gathered() {
        let m = sphere_with_field(2);
        let s = sample_vertices(&m, "p", 50, 1).unwrap();
        let field = m.field("p").unwrap();
        for (k, &i) in s.indices.iter().enumerate() {
            assert_eq!(s.truth[k], field[i as usize]);
            assert_eq!(s.points[k], m.vertices[i as usize]);
        }
        for n in s.normals.as_ref().unwrap() {
            assert!((crate::geom::norm(*n) - 1.0).abs() < 1e-6);
        }
        let mut idx = s.indices.clone();
        idx.sort();
        idx.dedup();
        assert_eq!(idx.len(), 50);
    }

    #[test]
    fn too_many_samples() {
        let m = sphere_with_field(0);
        assert!(matches!(
            sample_vertices(&m, "p", 13, 0),
            Err(SamplingError::SampleLargerThanMesh { requested: 13, available: 12 })
        ));
        assert!(matches!(sample_vertices(&m, "q", 3, 0), Err(SamplingError::MissingField { .. })));
    }

    #[test]
    fn area_weighted_mode_draws_distinct_vertices() {
        let m = sphere_with_field(3);
        let s = sample_vertices_with(&m, "p", 200, 9, SamplingMode::AreaWeighted).unwrap();
        let mut idx = s.indices.clone();
        idx.sort();
        idx.dedup();
        assert_eq!(idx.len(), 200);
    }

    #[test]
    fn interpolation_identity_and_constant() {
        let m = sphere_with_field(2);
        let all = sample_vertices(&m, "p", m.n_points(), 0).unwrap();
        let pred: Vec<f64> = (0..all.n()).map(|i| i as f64).collect();
        let full = interpolate_to_full(&m, &all, &pred).unwrap();
        for (k, &i) in all.indices.iter().enumerate() {
            assert_eq!(full[i as usize], pred[k]);
        }
        let some = sample_vertices(&m, "p", 30, 0).unwrap();
        let full = interpolate_to_full(&m, &some, &vec![2.5; 30]).unwrap();
        assert!(full.iter().all(|&v| v == 2.5));
        assert!(matches!(
            interpolate_to_full(&m, &some, &[1.0]),
            Err(SamplingError::LengthMismatch { expected: 30, found: 1 })
        ));
    }

    #[test]
    fn three_vertex_mesh_single_sample() {
        let mut m = SurfaceMesh::new("N_t", vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]], vec![]).unwrap();
        m.set_field("p", vec![7.0, 1.0, 2.0]).unwrap();
        let s = sample_vertices(&m, "p", 1, 0).unwrap();
        assert_eq!(interpolate_to_full(&m, &s, &[7.0]).unwrap(), vec![7.0, 7.0, 7.0]);
    }
}

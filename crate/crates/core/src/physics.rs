//! Pressure drag by surface integration.
//!
//! The harness works in kinematic units: fields are p/ρ in m²/s², so the
//! integrated force comes out in m⁴/s² and multiplying by the fluid density
//! gives newtons. Only the pressure part of the drag is available; surface
//! exports carry no wall shear, so friction drag is reported as unavailable.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{self, Vec3};
use crate::mesh::{SurfaceMesh, DEGENERATE_AREA};
use crate::numeric::CompensatedSum;
use crate::rng::fnv1a64;

#[derive(Debug, Error, PartialEq)]
pub enum PhysicsError {
    #[error("invalid flow reference: {0}")]
    InvalidReference(String),
    #[error("field has {found} values for {expected} vertices")]
    FieldLength { expected: usize, found: usize },
    #[error("faces sharing edge ({0}, {1}) are wound the same way")]
    OrientationInconsistent(u32, u32),
}

/// Free-stream reference state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowReference {
    /// Free-stream kinematic pressure, m²/s². Zero means gauge pressure.
    pub p_inf: f64,
    /// m/s
    pub u_inf: f64,
    /// m²
    pub a_ref: f64,
    /// Unit drag direction.
    pub x_hat: Vec3,
}

impl FlowReference {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        if !(self.u_inf > 0.0) {
            return Err(PhysicsError::InvalidReference(format!("u_inf must be positive, got {}", self.u_inf)));
        }
        if !(self.a_ref > 0.0) {
            return Err(PhysicsError::InvalidReference(format!("a_ref must be positive, got {}", self.a_ref)));
        }
        if (geom::norm(self.x_hat) - 1.0).abs() > 1e-9 {
            return Err(PhysicsError::InvalidReference("x_hat must be a unit vector".into()));
        }
        Ok(())
    }

    /// Dynamic pressure `½ U∞²` in kinematic units.
    pub fn dynamic_pressure(&self) -> f64 {
        0.5 * self.u_inf * self.u_inf
    }
}

/// Winding consistency check run before integrating.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationCheck {
    Off,
    /// Checks a deterministic ~5% subset of edges.
    #[default]
    Spot,
    Full,
}

/// Reports an edge traversed in the same direction by two faces.
pub fn check_orientation(mesh: &SurfaceMesh, mode: OrientationCheck) -> Result<(), PhysicsError> {
    if mode == OrientationCheck::Off {
        return Ok(());
    }
    let mut seen: HashMap<(u32, u32), u32> = HashMap::new();
    for t in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if mode == OrientationCheck::Spot {
                let key = (a.min(b) as u64) << 32 | a.max(b) as u64;
                if fnv1a64(&key.to_le_bytes()) % 20 != 0 {
                    continue;
                }
            }
            let count = seen.entry((a, b)).or_insert(0);
            *count += 1;
            if *count > 1 {
                return Err(PhysicsError::OrientationInconsistent(a, b));
            }
        }
    }
    Ok(())
}

/// Integrated pressure drag with bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PressureDrag {
    /// Kinematic force, m⁴/s².
    pub drag: f64,
    /// Faces at or below the degeneracy threshold, left out of the sum.
    pub degenerate_faces_skipped: usize,
}

const CHUNK: usize = 4096;

/// `D_p = −Σ_f (p̄_f − p∞)(n_f · x̂) A_f` with `p̄_f` the mean of the face's
/// vertex values (flat-facet midpoint rule).
pub fn pressure_drag(
    mesh: &SurfaceMesh,
    field: &[f64],
    reference: &FlowReference,
    orientation: OrientationCheck,
) -> Result<PressureDrag, PhysicsError> {
    reference.validate()?;
    if field.len() != mesh.n_points() {
        return Err(PhysicsError::FieldLength { expected: mesh.n_points(), found: field.len() });
    }
    check_orientation(mesh, orientation)?;
    let partials: Vec<(CompensatedSum, usize)> = mesh
        .triangles
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = CompensatedSum::new();
            let mut skipped = 0;
            for &[a, b, c] in chunk {
                let area_vec = geom::triangle_area_vector(
                    mesh.vertices[a as usize],
                    mesh.vertices[b as usize],
                    mesh.vertices[c as usize],
                );
                // n_f A_f = area_vec / 2
                if 0.5 * geom::norm(area_vec) <= DEGENERATE_AREA {
                    skipped += 1;
                    continue;
                }
                let p_face = (field[a as usize] + field[b as usize] + field[c as usize]) / 3.0;
                acc.add(-(p_face - reference.p_inf) * 0.5 * geom::dot(area_vec, reference.x_hat));
            }
            (acc, skipped)
        })
        .collect();
    let mut total = CompensatedSum::new();
    let mut skipped = 0;
    for (p, s) in &partials {
        total.merge(p);
        skipped += s;
    }
    Ok(PressureDrag { drag: total.value(), degenerate_faces_skipped: skipped })
}

/// `C_D = D / (½ U∞² A_ref)`; density cancels in kinematic form.
pub fn drag_coefficient(drag: f64, reference: &FlowReference) -> f64 {
    drag / (reference.dynamic_pressure() * reference.a_ref)
}

/// Pressure drag of the true and predicted fields on the same mesh.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DragConsistency {
    pub design_id: String,
    pub d_true: f64,
    pub d_pred: f64,
    pub abs_diff: f64,
    /// `abs_diff / |d_true|`, `None` when `d_true` is zero.
    pub rel_diff: Option<f64>,
    pub cd_true: f64,
    pub cd_pred: f64,
    pub degenerate_faces_skipped: usize,
}

pub fn drag_consistency_report(
    mesh: &SurfaceMesh,
    truth: &[f64],
    predicted: &[f64],
    reference: &FlowReference,
    orientation: OrientationCheck,
) -> Result<DragConsistency, PhysicsError> {
    let t = pressure_drag(mesh, truth, reference, orientation)?;
    let p = pressure_drag(mesh, predicted, reference, OrientationCheck::Off)?;
    let abs_diff = (p.drag - t.drag).abs();
    Ok(DragConsistency {
        design_id: mesh.design_id.clone(),
        d_true: t.drag,
        d_pred: p.drag,
        abs_diff,
        rel_diff: (t.drag != 0.0).then(|| abs_diff / t.drag.abs()),
        cd_true: drag_coefficient(t.drag, reference),
        cd_pred: drag_coefficient(p.drag, reference),
        degenerate_faces_skipped: t.degenerate_faces_skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;
    use std::f64::consts::PI;

    fn flow(u_inf: f64, a_ref: f64, x_hat: Vec3) -> FlowReference {
        FlowReference { p_inf: 0.0, u_inf, a_ref, x_hat }
    }

    /// Potential-flow sphere: p − p∞ = ½U²(1 − 9/4 sin²θ), θ from x̂.
    fn potential_flow_field(mesh: &SurfaceMesh, r: &FlowReference) -> Vec<f64> {
        mesh.vertices
            .iter()
            .map(|v| {
                let c = geom::dot(*v, r.x_hat) / geom::norm(*v);
                let s2 = 1.0 - c * c;
                r.p_inf + r.dynamic_pressure() * (1.0 - 2.25 * s2)
            })
            .collect()
    }

    #[test]
    fn reference_validation() {
        assert!(flow(30.0, 2.17, [1.0, 0.0, 0.0]).validate().is_ok());
        assert!(flow(0.0, 2.17, [1.0, 0.0, 0.0]).validate().is_err());
        assert!(flow(1.0, -1.0, [1.0, 0.0, 0.0]).validate().is_err());
        assert!(flow(1.0, 1.0, [1.0, 1.0, 0.0]).validate().is_err());
    }

    #[test]
    fn constant_pressure_on_closed_surface() {
        let r = FlowReference { p_inf: 3.0, ..flow(30.0, 2.17, [1.0, 0.0, 0.0]) };
        let m = shapes::icosphere(1.0, 3);
        let d = pressure_drag(&m, &vec![3.0; m.n_points()], &r, OrientationCheck::Full).unwrap();
        assert_eq!(d.drag, 0.0);
        let d = pressure_drag(&m, &vec![250.0; m.n_points()], &r, OrientationCheck::Full).unwrap();
        assert!(d.drag.abs() < 1e-9 * 250.0 * 4.0 * PI);
    }

    #[test]
    fn dalembert_on_icosphere() {
        let m = shapes::icosphere(1.0, 5);
        assert!(m.n_cells() >= 20_000);
        let r = flow(1.0, PI, [1.0, 0.0, 0.0]);
        let d = pressure_drag(&m, &potential_flow_field(&m, &r), &r, OrientationCheck::Full).unwrap();
        assert!(drag_coefficient(d.drag, &r).abs() < 1e-3);
    }

    #[test]
    fn potential_flow_vanishes_on_uv_sphere() {
        let r = flow(1.0, PI, geom::normalized([1.0, 0.3, 0.2]).unwrap());
        let m = shapes::uv_sphere(1.0, 7, 15);
        let d = pressure_drag(&m, &potential_flow_field(&m, &r), &r, OrientationCheck::Full).unwrap();
        assert!(drag_coefficient(d.drag, &r).abs() < 1e-12);
    }

    #[test]
    fn error_converges_at_second_order() {
        // p = (x·x̂)³ on the unit sphere: D = −∫ 3(x·x̂)² dV = −4π/5
        let r = flow(1.0, PI, geom::normalized([1.0, 0.3, 0.2]).unwrap());
        let exact = -4.0 * PI / 5.0;
        let error = |rings: usize| {
            let m = shapes::uv_sphere(1.0, rings, 2 * rings + 1);
            let field: Vec<f64> = m.vertices.iter().map(|v| geom::dot(*v, r.x_hat).powi(3)).collect();
            (pressure_drag(&m, &field, &r, OrientationCheck::Full).unwrap().drag - exact).abs()
        };
        let errs: Vec<f64> = [6, 12, 24, 48].iter().map(|&k| error(k)).collect();
        for w in errs.windows(2) {
            assert!(w[1] <= 0.5 * w[0], "errors {errs:?}");
        }
        let order = (errs[2] / errs[3]).log2();
        assert!(order >= 1.0, "observed order {order}");
    }

    #[test]
    fn hemisphere_projected_area() {
        let (rad, segments) = (0.8, 256);
        let m = shapes::hemisphere_cap(rad, 64, segments);
        let r = flow(1.0, PI * rad * rad, [1.0, 0.0, 0.0]);
        let d = pressure_drag(&m, &vec![1.0; m.n_points()], &r, OrientationCheck::Full).unwrap();
        // the cap projects onto its rim polygon
        let polygon = 0.5 * segments as f64 * rad * rad * (2.0 * PI / segments as f64).sin();
        assert!((d.drag + polygon).abs() < 1e-12);
        assert!(((d.drag + PI * rad * rad) / (PI * rad * rad)).abs() < 1e-3);
        assert!((drag_coefficient(d.drag, &r) + 2.0).abs() < 2e-3);
    }

    #[test]
    fn coefficient_definition() {
        let r = flow(30.0, 2.17, [1.0, 0.0, 0.0]);
        assert_eq!(drag_coefficient(0.0, &r), 0.0);
        assert!((drag_coefficient(0.5 * 900.0 * 2.17, &r) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orientation_flip_is_detected() {
        let mut m = shapes::icosphere(1.0, 2);
        assert!(check_orientation(&m, OrientationCheck::Full).is_ok());
        let t = m.triangles[7];
        m.triangles[7] = [t[0], t[2], t[1]];
        assert!(matches!(check_orientation(&m, OrientationCheck::Full), Err(PhysicsError::OrientationInconsistent(..))));
        assert!(check_orientation(&m, OrientationCheck::Off).is_ok());
    }

    #[test]
    fn consistency_report() {
        let m = shapes::icosphere(1.0, 3);
        let r = flow(10.0, PI, [1.0, 0.0, 0.0]);
        let truth: Vec<f64> = m.vertices.iter().map(|v| 40.0 * v[0] - 5.0 * v[2] * v[2]).collect();
        let same = drag_consistency_report(&m, &truth, &truth, &r, OrientationCheck::Spot).unwrap();
        assert_eq!(same.abs_diff, 0.0);
        let shifted: Vec<f64> = truth.iter().map(|v| v + 17.0).collect();
        let rep = drag_consistency_report(&m, &truth, &shifted, &r, OrientationCheck::Spot).unwrap();
        assert!(rep.abs_diff < 1e-9 * 17.0 * 4.0 * PI);
    }

    #[test]
    fn linear_in_field() {
        let m = shapes::uv_sphere(1.0, 10, 21);
        let r = flow(1.0, 1.0, [1.0, 0.0, 0.0]);
        let f: Vec<f64> = m.vertices.iter().map(|v| v[0] * 3.0 + v[1]).collect();
        let g: Vec<f64> = m.vertices.iter().map(|v| v[2] * v[0]).collect();
        let combo: Vec<f64> = f.iter().zip(&g).map(|(a, b)| 2.5 * a - 0.75 * b).collect();
        let d = |x: &[f64]| pressure_drag(&m, x, &r, OrientationCheck::Off).unwrap().drag;
        assert!((d(&combo) - (2.5 * d(&f) - 0.75 * d(&g))).abs() < 1e-12);
    }

    #[test]
    fn injected_wake_error_matches_direct_integral() {
        let m = shapes::subdivided_box(12, |p| [2.0 * p[0], 0.8 * p[1], 0.6 * p[2]]);
        let r = flow(30.0, 1.0, [1.0, 0.0, 0.0]);
        let truth: Vec<f64> = m.vertices.iter().map(|v| 400.0 * (-(v[0] + 2.0).powi(2)).exp() - 50.0 * v[2]).collect();
        let injected: Vec<f64> = m.vertices.iter().map(|v| if v[0] > 1.2 { -35.0 * (v[0] - 1.2) } else { 0.0 }).collect();
        let pred: Vec<f64> = truth.iter().zip(&injected).map(|(a, b)| a + b).collect();
        let rep = drag_consistency_report(&m, &truth, &pred, &r, OrientationCheck::Full).unwrap();

        let mut oracle = 0.0;
        for t in &m.triangles {
            let [a, b, c] = t.map(|i| m.vertices[i as usize]);
            let normal = geom::cross(geom::sub(b, a), geom::sub(c, a));
            let area = 0.5 * geom::norm(normal);
            let e = t.iter().map(|&i| injected[i as usize]).sum::<f64>() / 3.0;
            oracle -= e * (normal[0] / geom::norm(normal)) * area;
        }
        assert!(oracle.abs() > 1.0);
        assert!(((rep.d_pred - rep.d_true) - oracle).abs() <= 1e-6 * oracle.abs());
        assert!((rep.abs_diff - oracle.abs()).abs() <= 1e-6 * oracle.abs());
    }

    #[test]
    fn degenerate_faces_are_skipped() {
        let mut m = shapes::icosphere(1.0, 1);
        let t = m.triangles[0];
        m.triangles.push([t[0], t[0], t[1]]);
        let r = flow(1.0, 1.0, [1.0, 0.0, 0.0]);
        let d = pressure_drag(&m, &vec![1.0; m.n_points()], &r, OrientationCheck::Off).unwrap();
        assert_eq!(d.degenerate_faces_skipped, 1);
    }

    proptest::proptest! {
        #[test]
        fn constant_offset_is_invisible(c in -1e4f64..1e4, seed in 0u64..1000) {
            let m = shapes::uv_sphere(1.3, 9, 17);
            let r = flow(1.0, 1.0, [1.0, 0.0, 0.0]);
            let f: Vec<f64> = m.vertices.iter().enumerate()
                .map(|(i, v)| v[0] * 10.0 + ((i as u64 * 2654435761 + seed) % 97) as f64)
                .collect();
            let g: Vec<f64> = f.iter().map(|v| v + c).collect();
            let d = |x: &[f64]| pressure_drag(&m, x, &r, OrientationCheck::Off).unwrap().drag;
            let scale = f.iter().chain(&g).fold(0.0f64, |a, v| a.max(v.abs()));
            let area = crate::mesh::geometry_stats(&m).surface_area;
            proptest::prop_assert!((d(&f) - d(&g)).abs() <= 1e-9 * scale * area);
        }
    }
}

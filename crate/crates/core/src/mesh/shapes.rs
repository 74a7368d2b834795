//! Analytic test shapes: cubes, icospheres, hemispherical caps and
//! subdivided boxes. All closed shapes are wound with outward normals.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::{Category, SurfaceMesh};
use crate::geom::{self, Vec3};

fn bare(design_id: &str, vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> SurfaceMesh {
    SurfaceMesh {
        design_id: design_id.to_string(),
        category: Category::Unknown,
        vertices,
        triangles,
        point_fields: Vec::new(),
    }
}

/// Axis-aligned box `[0,1]^3` mapped through `map`, each face split into
/// `divisions x divisions` quads (two triangles each).
pub fn subdivided_box(divisions: usize, map: impl Fn(Vec3) -> Vec3) -> SurfaceMesh {
    let m = divisions.max(1) as i64;
    let mut index: HashMap<[i64; 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut vid = |key: [i64; 3], vertices: &mut Vec<Vec3>| -> u32 {
        *index.entry(key).or_insert_with(|| {
            let p = [key[0] as f64 / m as f64, key[1] as f64 / m as f64, key[2] as f64 / m as f64];
            vertices.push(map(p));
            (vertices.len() - 1) as u32
        })
    };
    // (fixed axis, fixed value, u axis, v axis) with u x v pointing outward
    let faces: [(usize, i64, usize, usize); 6] = [
        (0, m, 1, 2),
        (0, 0, 2, 1),
        (1, m, 2, 0),
        (1, 0, 0, 2),
        (2, m, 0, 1),
        (2, 0, 1, 0),
    ];
    for (axis, fixed, u, v) in faces {
        for i in 0..m {
            for j in 0..m {
                let key = |di: i64, dj: i64| {
                    let mut k = [0i64; 3];
                    k[axis] = fixed;
                    k[u] = i + di;
                    k[v] = j + dj;
                    k
                };
                let p00 = vid(key(0, 0), &mut vertices);
                let p10 = vid(key(1, 0), &mut vertices);
                let p11 = vid(key(1, 1), &mut vertices);
                let p01 = vid(key(0, 1), &mut vertices);
                triangles.push([p00, p10, p11]);
                triangles.push([p00, p11, p01]);
            }
        }
    }
    bare("box", vertices, triangles)
}

/// Cube of the given side centred at the origin, 12 triangles.
pub fn cube(side: f64) -> SurfaceMesh {
    let mut mesh = subdivided_box(1, |p| geom::scale(geom::sub(p, [0.5; 3]), side));
    mesh.design_id = "cube".into();
    mesh
}

/// Icosphere of `radius` centred at the origin: `20 * 4^subdivisions` faces.
pub fn icosphere(radius: f64, subdivisions: u32) -> SurfaceMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for v in &mut vertices {
        *v = geom::normalized(*v).expect("nonzero");
    }
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: u32, b: u32, vertices: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = geom::scale(geom::add(vertices[a as usize], vertices[b as usize]), 0.5);
                vertices.push(geom::normalized(m).expect("nonzero"));
                (vertices.len() - 1) as u32
            })
        };
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    let vertices = vertices.into_iter().map(|v| geom::scale(v, radius)).collect();
    bare("icosphere", vertices, faces)
}

/// Open hemispherical cap of `radius` whose pole points along +x, built
/// from `rings` latitude bands and `segments` longitudes. The rim lies in
/// the x = 0 plane; normals point away from the centre.
pub fn hemisphere_cap(radius: f64, rings: usize, segments: usize) -> SurfaceMesh {
    let rings = rings.max(1);
    let segments = segments.max(3);
    let mut vertices = vec![[radius, 0.0, 0.0]];
    for k in 1..=rings {
        let theta = 0.5 * PI * k as f64 / rings as f64;
        let (st, ct) = theta.sin_cos();
        for j in 0..segments {
            let phi = 2.0 * PI * j as f64 / segments as f64;
            let (sp, cp) = phi.sin_cos();
            vertices.push([radius * ct, radius * st * cp, radius * st * sp]);
        }
    }
    let ring = |k: usize, j: usize| (1 + (k - 1) * segments + j % segments) as u32;
    let mut triangles = Vec::new();
    for j in 0..segments {
        triangles.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for k in 1..rings {
        for j in 0..segments {
            let (i0, i1) = (ring(k, j), ring(k, j + 1));
            let (o0, o1) = (ring(k + 1, j), ring(k + 1, j + 1));
            triangles.push([i0, o0, o1]);
            triangles.push([i0, o1, i1]);
        }
    }
    bare("hemisphere", vertices, triangles)
}

/// Latitude-longitude sphere with poles on the z axis: `rings` latitude
/// bands and `segments` longitudes. With an odd `segments` count the mesh is
/// not centrally symmetric.
pub fn uv_sphere(radius: f64, rings: usize, segments: usize) -> SurfaceMesh {
    let rings = rings.max(2);
    let segments = segments.max(3);
    let mut vertices = vec![[0.0, 0.0, radius]];
    for k in 1..rings {
        let theta = PI * k as f64 / rings as f64;
        let (st, ct) = theta.sin_cos();
        for j in 0..segments {
            let phi = 2.0 * PI * j as f64 / segments as f64;
            let (sp, cp) = phi.sin_cos();
            vertices.push([radius * st * cp, radius * st * sp, radius * ct]);
        }
    }
    vertices.push([0.0, 0.0, -radius]);
    let south = (vertices.len() - 1) as u32;
    let ring = |k: usize, j: usize| (1 + (k - 1) * segments + j % segments) as u32;
    let mut triangles = Vec::new();
    for j in 0..segments {
        triangles.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for k in 1..rings - 1 {
        for j in 0..segments {
            let (i0, i1) = (ring(k, j), ring(k, j + 1));
            let (o0, o1) = (ring(k + 1, j), ring(k + 1, j + 1));
            triangles.push([i0, o0, o1]);
            triangles.push([i0, o1, i1]);
        }
    }
    for j in 0..segments {
        triangles.push([south, ring(rings - 1, j + 1), ring(rings - 1, j)]);
    }
    bare("uv_sphere", vertices, triangles)
}

/// Polar angle from the +x axis of every vertex, in radians.
pub fn polar_angles_from_x(mesh: &SurfaceMesh) -> Vec<f64> {
    mesh.vertices
        .iter()
        .map(|v| {
            let r = geom::norm(*v);
            (v[0] / r).clamp(-1.0, 1.0).acos()
        })
        .collect()
}

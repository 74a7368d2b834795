//! Surface meshes with per-vertex scalar fields.
//!
//! Two readers produce a [`SurfaceMesh`]: the legacy VTK POLYDATA reader in
//! [`vtk`] and the ABM1 cache format in [`native`]. Both store coordinates
//! and field values as `f64` regardless of the on-disk precision.

pub mod native;
pub mod shapes;
pub mod vtk;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{self, Vec3};
use crate::numeric::CompensatedSum;

/// Faces with area at or below this are treated as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("unsupported VTK content: {0}")]
    UnsupportedSection(String),
    #[error("face {face} references vertex {index} but the mesh has {n_points} points")]
    IndexOutOfRange { face: usize, index: u64, n_points: usize },
    #[error("stream ended early while reading {0}")]
    TruncatedStream(String),
    #[error("polygon {face} has {arity} vertices; strict mode accepts triangles only")]
    NonTriangleFace { face: usize, arity: usize },
    #[error("file carries CELL_DATA only; vertex-associated point data is required")]
    CellDataOnly,
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("point field '{name}' has {len} values for {n_points} points")]
    FieldLength { name: String, len: usize, n_points: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rear-body archetype of a design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "F")]
    Fastback,
    #[serde(rename = "E")]
    Estateback,
    #[serde(rename = "N")]
    Notchback,
    #[serde(rename = "U")]
    Unknown,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Fastback,
        Category::Estateback,
        Category::Notchback,
        Category::Unknown,
    ];

    /// Category encoded in a design id prefix (`E_`, `N_`, `F_`).
    pub fn from_design_id(design_id: &str) -> Category {
        if design_id.starts_with("F_") {
            Category::Fastback
        } else if design_id.starts_with("E_") {
            Category::Estateback
        } else if design_id.starts_with("N_") {
            Category::Notchback
        } else {
            Category::Unknown
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Category::Unknown => 0,
            Category::Fastback => 1,
            Category::Estateback => 2,
            Category::Notchback => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Category> {
        match code {
            0 => Some(Category::Unknown),
            1 => Some(Category::Fastback),
            2 => Some(Category::Estateback),
            3 => Some(Category::Notchback),
            _ => None,
        }
    }

    pub fn letter(self) -> &'static str {
        match self {
            Category::Fastback => "F",
            Category::Estateback => "E",
            Category::Notchback => "N",
            Category::Unknown => "U",
        }
    }

    pub fn from_letter(s: &str) -> Option<Category> {
        match s {
            "F" => Some(Category::Fastback),
            "E" => Some(Category::Estateback),
            "N" => Some(Category::Notchback),
            "U" => Some(Category::Unknown),
            _ => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Category::Fastback => "Fastback",
            Category::Estateback => "Estateback",
            Category::Notchback => "Notchback",
            Category::Unknown => "Unknown",
        };
        f.write_str(name)
    }
}

/// A named scalar array aligned with the mesh vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct PointField {
    pub name: String,
    pub values: Vec<f64>,
}

/// Triangulated surface with per-vertex scalar fields.
///
/// Field values are kinematic pressure (m²/s²) for the pressure field; the
/// mesh itself does not interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub design_id: String,
    pub category: Category,
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub point_fields: Vec<PointField>,
}

impl SurfaceMesh {
    /// Builds a mesh and checks index and field-length invariants.
    pub fn new(
        design_id: impl Into<String>,
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        point_fields: Vec<PointField>,
    ) -> Result<Self, MeshError> {
        let design_id = design_id.into();
        let mesh = SurfaceMesh {
            category: Category::from_design_id(&design_id),
            design_id,
            vertices,
            triangles,
            point_fields,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn with_category(mut self, category: Category) -> Self {
        self.category = category;
        self
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let n = self.vertices.len();
        for (face, tri) in self.triangles.iter().enumerate() {
            for &i in tri {
                if i as usize >= n {
                    return Err(MeshError::IndexOutOfRange { face, index: i.into(), n_points: n });
                }
            }
        }
        for f in &self.point_fields {
            if f.values.len() != n {
                return Err(MeshError::FieldLength {
                    name: f.name.clone(),
                    len: f.values.len(),
                    n_points: n,
                });
            }
        }
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.triangles.len()
    }

    pub fn field(&self, name: &str) -> Option<&[f64]> {
        self.point_fields
            .iter()
            .find(|f| f.name == name)
            .map(|f| f.values.as_slice())
    }

    /// Adds or replaces a point field.
    pub fn set_field(&mut self, name: &str, values: Vec<f64>) -> Result<(), MeshError> {
        if values.len() != self.vertices.len() {
            return Err(MeshError::FieldLength {
                name: name.to_string(),
                len: values.len(),
                n_points: self.vertices.len(),
            });
        }
        match self.point_fields.iter_mut().find(|f| f.name == name) {
            Some(f) => f.values = values,
            None => self.point_fields.push(PointField { name: name.to_string(), values }),
        }
        Ok(())
    }

    pub fn face_vertices(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[face];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.face_vertices(face);
        0.5 * geom::norm(geom::triangle_area_vector(a, b, c))
    }

    /// Indices of faces whose area is at or below [`DEGENERATE_AREA`].
    pub fn degenerate_faces(&self) -> Vec<usize> {
        (0..self.triangles.len())
            .filter(|&f| self.face_area(f) <= DEGENERATE_AREA)
            .collect()
    }

    /// Area-weighted vertex normals (unit length). Isolated vertices, and
    /// vertices whose incident normals cancel, get `[0, 0, 0]`.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut acc = vec![[0.0; 3]; self.vertices.len()];
        for &[a, b, c] in &self.triangles {
            let n = geom::triangle_area_vector(
                self.vertices[a as usize],
                self.vertices[b as usize],
                self.vertices[c as usize],
            );
            for i in [a, b, c] {
                acc[i as usize] = geom::add(acc[i as usize], n);
            }
        }
        acc.into_iter()
            .map(|n| geom::normalized(n).unwrap_or([0.0; 3]))
            .collect()
    }

    /// Axis-aligned bounding box `(min, max)`; `None` for an empty mesh.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        let mut lo = first;
        let mut hi = first;
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        Some((lo, hi))
    }
}

/// Per-design geometry summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryStats {
    pub n_points: usize,
    pub n_cells: usize,
    /// m²
    pub surface_area: f64,
}

/// Point/cell counts and total area. Degenerate faces contribute zero.
pub fn geometry_stats(mesh: &SurfaceMesh) -> GeometryStats {
    let area: CompensatedSum = (0..mesh.n_cells()).map(|f| mesh.face_area(f)).collect();
    GeometryStats {
        n_points: mesh.n_points(),
        n_cells: mesh.n_cells(),
        surface_area: area.value(),
    }
}

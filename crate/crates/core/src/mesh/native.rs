//! ABM1: the harness's mesh cache format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "ABM1"                       magic, 4 bytes
//! u32                          version (1)
//! u32 len + UTF-8              design_id
//! u8                           category code (0 U, 1 F, 2 E, 3 N)
//! u64 + n * 3 * f64            vertices
//! u64 + m * 3 * u32            triangles
//! u32                          field count
//!   u32 len + UTF-8, u64 + f64s   per field: name, values
//! u32                          CRC32 of every preceding byte
//! ```

use super::{Category, MeshError, PointField, SurfaceMesh};
use crate::binio::{ByteReader, ByteWriter, BinError};

pub const MAGIC: [u8; 4] = *b"ABM1";
pub const VERSION: u32 = 1;

impl From<BinError> for MeshError {
    fn from(e: BinError) -> Self {
        match e {
            BinError::Truncated(what) => MeshError::TruncatedStream(what),
            BinError::Utf8 => MeshError::Malformed("invalid UTF-8 string".into()),
            BinError::Checksum { stored, computed } => MeshError::ChecksumMismatch { stored, computed },
        }
    }
}

pub fn write_native(mesh: &SurfaceMesh) -> Vec<u8> {
    let mut w = ByteWriter::with_capacity(
        64 + mesh.vertices.len() * 24
            + mesh.triangles.len() * 12
            + mesh.point_fields.iter().map(|f| 16 + f.name.len() + 8 * f.values.len()).sum::<usize>(),
    );
    w.bytes(&MAGIC);
    w.u32(VERSION);
    w.string(&mesh.design_id);
    w.u8(mesh.category.code());
    w.u64(mesh.vertices.len() as u64);
    for v in &mesh.vertices {
        for &c in v {
            w.f64(c);
        }
    }
    w.u64(mesh.triangles.len() as u64);
    for t in &mesh.triangles {
        for &i in t {
            w.u32(i);
        }
    }
    w.u32(mesh.point_fields.len() as u32);
    for f in &mesh.point_fields {
        w.string(&f.name);
        w.u64(f.values.len() as u64);
        for &v in &f.values {
            w.f64(v);
        }
    }
    w.finish_with_crc()
}

pub fn parse_native(bytes: &[u8]) -> Result<SurfaceMesh, MeshError> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(MeshError::BadMagic);
    }
    let mut r = ByteReader::new(bytes);
    r.take(4, "magic")?;
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(MeshError::VersionMismatch { found: version, expected: VERSION });
    }
    let payload = r.verify_crc()?;
    let mut r = ByteReader::new(payload);
    r.take(8, "header")?;
    let design_id = r.string("design_id")?;
    let code = r.u8("category")?;
    let category = Category::from_code(code)
        .ok_or_else(|| MeshError::Malformed(format!("unknown category code {code}")))?;
    let n = r.count(24, "vertex count")?;
    let mut vertices = Vec::with_capacity(n);
    for _ in 0..n {
        vertices.push([r.f64("vertices")?, r.f64("vertices")?, r.f64("vertices")?]);
    }
    let m = r.count(12, "triangle count")?;
    let mut triangles = Vec::with_capacity(m);
    for _ in 0..m {
        triangles.push([r.u32("triangles")?, r.u32("triangles")?, r.u32("triangles")?]);
    }
    let n_fields = r.u32("field count")?;
    let mut point_fields = Vec::new();
    for _ in 0..n_fields {
        let name = r.string("field name")?;
        let len = r.count(8, "field length")?;
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            values.push(r.f64("field values")?);
        }
        point_fields.push(PointField { name, values });
    }
    if !r.is_empty() {
        return Err(MeshError::Malformed("trailing bytes before checksum".into()));
    }
    let mesh = SurfaceMesh { design_id, category, vertices, triangles, point_fields };
    mesh.validate()?;
    Ok(mesh)
}

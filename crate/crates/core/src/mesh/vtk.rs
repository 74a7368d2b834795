//! Legacy VTK reader/writer, POLYDATA subset.
//!
//! Handles ASCII and BINARY (big-endian) encodings, both the classic
//! `POLYGONS n size` connectivity layout and the 5.x `OFFSETS`/`CONNECTIVITY`
//! layout, and `POINT_DATA` arrays given as `SCALARS` or `FIELD` blocks.
//! Single-component point arrays become [`PointField`]s; vector arrays and
//! `CELL_DATA` are read past and dropped.

use std::fmt::Write as _;

use super::{MeshError, PointField, SurfaceMesh};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, Default)]
pub struct VtkOptions {
    /// Reject non-triangle polygons instead of fan-triangulating them.
    pub strict_triangles: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Ascii,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DataType {
    U8,
    I8,
    U16,
    I16,
    U32,
    I32,
    U64,
    I64,
    F32,
    F64,
}

impl DataType {
    fn parse(s: &str) -> Result<Self, MeshError> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "unsigned_char" => DataType::U8,
            "char" => DataType::I8,
            "unsigned_short" => DataType::U16,
            "short" => DataType::I16,
            "unsigned_int" => DataType::U32,
            "int" => DataType::I32,
            "unsigned_long" | "vtktypeuint64" => DataType::U64,
            "long" | "vtktypeint64" | "vtkidtype" => DataType::I64,
            "float" => DataType::F32,
            "double" => DataType::F64,
            other => return Err(MeshError::UnsupportedSection(format!("data type '{other}'"))),
        })
    }

    fn size(self) -> usize {
        match self {
            DataType::U8 | DataType::I8 => 1,
            DataType::U16 | DataType::I16 => 2,
            DataType::U32 | DataType::I32 | DataType::F32 => 4,
            DataType::U64 | DataType::I64 | DataType::F64 => 8,
        }
    }

    fn decode_be(self, b: &[u8]) -> f64 {
        match self {
            DataType::U8 => b[0] as f64,
            DataType::I8 => b[0] as i8 as f64,
            DataType::U16 => u16::from_be_bytes([b[0], b[1]]) as f64,
            DataType::I16 => i16::from_be_bytes([b[0], b[1]]) as f64,
            DataType::U32 => u32::from_be_bytes(b[..4].try_into().unwrap()) as f64,
            DataType::I32 => i32::from_be_bytes(b[..4].try_into().unwrap()) as f64,
            DataType::U64 => u64::from_be_bytes(b[..8].try_into().unwrap()) as f64,
            DataType::I64 => i64::from_be_bytes(b[..8].try_into().unwrap()) as f64,
            DataType::F32 => f32::from_be_bytes(b[..4].try_into().unwrap()) as f64,
            DataType::F64 => f64::from_be_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    encoding: Encoding,
}

impl<'a> Reader<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn raw_line(&mut self) -> Option<&'a str> {
        if self.at_end() {
            return None;
        }
        let start = self.pos;
        let end = self.bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(self.bytes.len(), |i| start + i);
        self.pos = (end + 1).min(self.bytes.len());
        let line = &self.bytes[start..end];
        // keyword lines are ASCII; lossy is fine for anything else
        Some(std::str::from_utf8(line).unwrap_or("").trim_end_matches('\r'))
    }

    /// Next line with content, split into whitespace tokens.
    fn keyword_line(&mut self) -> Option<Vec<&'a str>> {
        while let Some(line) = self.raw_line() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if !toks.is_empty() {
                return Some(toks);
            }
        }
        None
    }

    fn skip_whitespace(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek_keyword(&mut self, word: &str) -> bool {
        let save = self.pos;
        self.skip_whitespace();
        let hit = self.bytes[self.pos..].starts_with(word.as_bytes());
        self.pos = save;
        hit
    }

    fn token(&mut self) -> Option<&'a str> {
        self.skip_whitespace();
        if self.at_end() {
            return None;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).ok()
    }

    fn values(&mut self, count: usize, dtype: DataType, what: &str) -> Result<Vec<f64>, MeshError> {
        match self.encoding {
            Encoding::Ascii => {
                let mut out = Vec::with_capacity(count);
                for _ in 0..count {
                    let tok = self
                        .token()
                        .ok_or_else(|| MeshError::TruncatedStream(what.to_string()))?;
                    let v: f64 = tok.parse().map_err(|_| {
                        MeshError::Malformed(format!("bad number '{tok}' in {what}"))
                    })?;
                    out.push(v);
                }
                Ok(out)
            }
            Encoding::Binary => {
                let size = dtype.size();
                let need = count
                    .checked_mul(size)
                    .ok_or_else(|| MeshError::Malformed(format!("{what}: size overflow")))?;
                if self.pos + need > self.bytes.len() {
                    return Err(MeshError::TruncatedStream(what.to_string()));
                }
                let out = self.bytes[self.pos..self.pos + need]
                    .chunks_exact(size)
                    .map(|c| dtype.decode_be(c))
                    .collect();
                self.pos += need;
                Ok(out)
            }
        }
    }
}

fn parse_count(tok: Option<&&str>, what: &str) -> Result<usize, MeshError> {
    tok.ok_or_else(|| MeshError::Malformed(format!("missing count in {what}")))?
        .parse()
        .map_err(|_| MeshError::Malformed(format!("bad count in {what}")))
}

fn to_index(v: f64, what: &str) -> Result<u64, MeshError> {
    if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
        return Err(MeshError::Malformed(format!("invalid index {v} in {what}")));
    }
    Ok(v as u64)
}

fn decode_name(name: &str) -> String {
    let bytes = name.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%'
            && i + 2 < bytes.len()
            && bytes[i + 1].is_ascii_hexdigit()
            && bytes[i + 2].is_ascii_hexdigit()
        {
            let hex = std::str::from_utf8(&bytes[i + 1..i + 3]).unwrap_or("00");
            out.push(u8::from_str_radix(hex, 16).unwrap_or(0));
            i += 3;
            continue;
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

/// Cell list as a flat connectivity array plus offsets (`n_cells + 1`).
fn read_cells(r: &mut Reader<'_>, toks: &[&str], what: &str) -> Result<(Vec<u64>, Vec<u64>), MeshError> {
    let a = parse_count(toks.get(1), what)?;
    let b = parse_count(toks.get(2), what)?;
    if r.peek_keyword("OFFSETS") {
        let line = r.keyword_line().unwrap_or_default();
        let dt = DataType::parse(line.get(1).copied().unwrap_or("vtktypeint64"))?;
        let offsets = r.values(a, dt, what)?;
        let line = r
            .keyword_line()
            .ok_or_else(|| MeshError::TruncatedStream(what.to_string()))?;
        if line[0] != "CONNECTIVITY" {
            return Err(MeshError::Malformed(format!("expected CONNECTIVITY in {what}")));
        }
        let dt = DataType::parse(line.get(1).copied().unwrap_or("vtktypeint64"))?;
        let conn = r.values(b, dt, what)?;
        let offsets = offsets
            .into_iter()
            .map(|v| to_index(v, what))
            .collect::<Result<Vec<_>, _>>()?;
        let conn = conn
            .into_iter()
            .map(|v| to_index(v, what))
            .collect::<Result<Vec<_>, _>>()?;
        let offsets = if offsets.is_empty() { vec![0] } else { offsets };
        if offsets.windows(2).any(|w| w[0] > w[1]) || *offsets.last().unwrap() as usize > conn.len() {
            return Err(MeshError::Malformed(format!("inconsistent offsets in {what}")));
        }
        Ok((offsets, conn))
    } else {
        let raw = r.values(b, DataType::I32, what)?;
        let mut offsets = Vec::with_capacity(a + 1);
        let mut conn = Vec::with_capacity(b.saturating_sub(a));
        offsets.push(0);
        let mut i = 0;
        for _ in 0..a {
            let k = to_index(
                *raw.get(i).ok_or_else(|| MeshError::TruncatedStream(what.to_string()))?,
                what,
            )? as usize;
            let ids = raw
                .get(i + 1..i + 1 + k)
                .ok_or_else(|| MeshError::TruncatedStream(what.to_string()))?;
            for &v in ids {
                conn.push(to_index(v, what)?);
            }
            offsets.push(conn.len() as u64);
            i += 1 + k;
        }
        Ok((offsets, conn))
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Attach {
    None,
    Point(usize),
    Cell(usize),
}

/// Parses a legacy VTK POLYDATA file into a [`SurfaceMesh`].
///
/// The design id is supplied by the caller (typically the file stem); the
/// category follows from its prefix.
pub fn parse_vtk_polydata(bytes: &[u8], design_id: &str, opts: VtkOptions) -> Result<SurfaceMesh, MeshError> {
    let mut r = Reader { bytes, pos: 0, encoding: Encoding::Ascii };
    let header = r.raw_line().ok_or_else(|| MeshError::TruncatedStream("header".into()))?;
    if !header.trim_start().starts_with("# vtk DataFile") {
        return Err(MeshError::Malformed("missing '# vtk DataFile' header".into()));
    }
    r.raw_line().ok_or_else(|| MeshError::TruncatedStream("title".into()))?;
    let enc = r.keyword_line().ok_or_else(|| MeshError::TruncatedStream("encoding".into()))?;
    r.encoding = match enc[0].to_ascii_uppercase().as_str() {
        "ASCII" => Encoding::Ascii,
        "BINARY" => Encoding::Binary,
        other => return Err(MeshError::Malformed(format!("unknown encoding '{other}'"))),
    };
    let ds = r.keyword_line().ok_or_else(|| MeshError::TruncatedStream("DATASET".into()))?;
    if ds.len() < 2 || ds[0] != "DATASET" {
        return Err(MeshError::Malformed("expected DATASET line".into()));
    }
    if !ds[1].eq_ignore_ascii_case("POLYDATA") {
        return Err(MeshError::UnsupportedSection(format!("DATASET {}", ds[1])));
    }

    let mut points: Option<Vec<Vec3>> = None;
    let mut polygons: Option<(Vec<u64>, Vec<u64>)> = None;
    let mut fields: Vec<PointField> = Vec::new();
    let mut attach = Attach::None;
    let mut saw_cell_data = false;

    while let Some(toks) = r.keyword_line() {
        let kw = toks[0].to_ascii_uppercase();
        match kw.as_str() {
            "POINTS" => {
                let n = parse_count(toks.get(1), "POINTS")?;
                let dt = DataType::parse(toks.get(2).copied().unwrap_or("float"))?;
                let flat = r.values(3 * n, dt, "POINTS")?;
                points = Some(flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect());
            }
            "POLYGONS" => polygons = Some(read_cells(&mut r, &toks, "POLYGONS")?),
            "VERTICES" | "LINES" | "TRIANGLE_STRIPS" => {
                let (offsets, _) = read_cells(&mut r, &toks, &kw)?;
                if offsets.len() > 1 {
                    return Err(MeshError::UnsupportedSection(format!("{kw} cells")));
                }
            }
            "POINT_DATA" => attach = Attach::Point(parse_count(toks.get(1), "POINT_DATA")?),
            "CELL_DATA" => {
                saw_cell_data = true;
                attach = Attach::Cell(parse_count(toks.get(1), "CELL_DATA")?);
            }
            "METADATA" => {
                while let Some(line) = r.raw_line() {
                    if line.trim().is_empty() {
                        break;
                    }
                }
            }
            "SCALARS" => {
                let name = decode_name(toks.get(1).copied().unwrap_or("scalars"));
                let dt = DataType::parse(toks.get(2).copied().unwrap_or("float"))?;
                let ncomp = toks.get(3).map_or(Ok(1), |t| parse_count(Some(t), "SCALARS"))?;
                if r.peek_keyword("LOOKUP_TABLE") {
                    r.keyword_line();
                }
                let n = attached_count(attach, "SCALARS")?;
                let vals = r.values(n * ncomp, dt, "SCALARS")?;
                if let Attach::Point(_) = attach {
                    if ncomp == 1 {
                        fields.push(PointField { name, values: vals });
                    }
                }
            }
            "COLOR_SCALARS" => {
                let ncomp = parse_count(toks.get(2), "COLOR_SCALARS")?;
                let n = attached_count(attach, "COLOR_SCALARS")?;
                r.values(n * ncomp, DataType::U8, "COLOR_SCALARS")?;
            }
            "LOOKUP_TABLE" => {
                let size = parse_count(toks.get(2), "LOOKUP_TABLE")?;
                r.values(4 * size, DataType::U8, "LOOKUP_TABLE")?;
            }
            "VECTORS" | "NORMALS" => {
                let dt = DataType::parse(toks.get(2).copied().unwrap_or("float"))?;
                let n = attached_count(attach, &kw)?;
                r.values(3 * n, dt, &kw)?;
            }
            "TENSORS" => {
                let dt = DataType::parse(toks.get(2).copied().unwrap_or("float"))?;
                let n = attached_count(attach, "TENSORS")?;
                r.values(9 * n, dt, "TENSORS")?;
            }
            "TEXTURE_COORDINATES" => {
                let dim = parse_count(toks.get(2), "TEXTURE_COORDINATES")?;
                let dt = DataType::parse(toks.get(3).copied().unwrap_or("float"))?;
                let n = attached_count(attach, "TEXTURE_COORDINATES")?;
                r.values(dim * n, dt, "TEXTURE_COORDINATES")?;
            }
            "FIELD" => {
                let n_arrays = parse_count(toks.get(2), "FIELD")?;
                for _ in 0..n_arrays {
                    let mut line = r
                        .keyword_line()
                        .ok_or_else(|| MeshError::TruncatedStream("FIELD array".into()))?;
                    while line[0] == "METADATA" {
                        while let Some(l) = r.raw_line() {
                            if l.trim().is_empty() {
                                break;
                            }
                        }
                        line = r
                            .keyword_line()
                            .ok_or_else(|| MeshError::TruncatedStream("FIELD array".into()))?;
                    }
                    if line[0] == "NULL_ARRAY" {
                        continue;
                    }
                    let name = decode_name(line[0]);
                    let ncomp = parse_count(line.get(1), "FIELD array")?;
                    let ntup = parse_count(line.get(2), "FIELD array")?;
                    let dt = DataType::parse(line.get(3).copied().unwrap_or("float"))?;
                    let vals = r.values(ncomp * ntup, dt, "FIELD array")?;
                    if let Attach::Point(n) = attach {
                        if ncomp == 1 && ntup == n {
                            fields.push(PointField { name, values: vals });
                        }
                    }
                }
            }
            other => {
                return Err(MeshError::UnsupportedSection(other.to_string()));
            }
        }
    }

    let vertices = points.ok_or_else(|| MeshError::Malformed("no POINTS section".into()))?;
    let n_points = vertices.len();
    let (offsets, conn) = polygons.unwrap_or((vec![0], vec![]));
    let mut triangles = Vec::with_capacity(offsets.len().saturating_sub(1));
    for (face, w) in offsets.windows(2).enumerate() {
        let ids = &conn[w[0] as usize..w[1] as usize];
        for &i in ids {
            if i as usize >= n_points {
                return Err(MeshError::IndexOutOfRange { face, index: i, n_points });
            }
        }
        match ids.len() {
            3 => triangles.push([ids[0] as u32, ids[1] as u32, ids[2] as u32]),
            k if k > 3 && !opts.strict_triangles => {
                for j in 1..k - 1 {
                    triangles.push([ids[0] as u32, ids[j] as u32, ids[j + 1] as u32]);
                }
            }
            k => return Err(MeshError::NonTriangleFace { face, arity: k }),
        }
    }
    if fields.is_empty() && saw_cell_data {
        return Err(MeshError::CellDataOnly);
    }
    if let Attach::Point(n) = attach {
        if n != n_points {
            return Err(MeshError::Malformed(format!(
                "POINT_DATA declares {n} values for {n_points} points"
            )));
        }
    }
    SurfaceMesh::new(design_id, vertices, triangles, fields)
}

fn attached_count(attach: Attach, what: &str) -> Result<usize, MeshError> {
    match attach {
        Attach::Point(n) | Attach::Cell(n) => Ok(n),
        Attach::None => Err(MeshError::Malformed(format!("{what} outside POINT_DATA/CELL_DATA"))),
    }
}

/// Writes the mesh as legacy VTK 3.0 POLYDATA with double-precision points
/// and one `SCALARS` block per point field.
pub fn write_vtk_polydata(mesh: &SurfaceMesh, encoding: Encoding) -> Vec<u8> {
    let mut out = Vec::new();
    let mut head = String::new();
    let enc = match encoding {
        Encoding::Ascii => "ASCII",
        Encoding::Binary => "BINARY",
    };
    let _ = write!(
        head,
        "# vtk DataFile Version 3.0\n{}\n{enc}\nDATASET POLYDATA\nPOINTS {} double\n",
        mesh.design_id,
        mesh.n_points()
    );
    out.extend_from_slice(head.as_bytes());
    let emit_f64 = |out: &mut Vec<u8>, vals: &mut dyn Iterator<Item = f64>| match encoding {
        Encoding::Ascii => {
            let mut s = String::new();
            for (i, v) in vals.enumerate() {
                if i > 0 {
                    s.push(if i % 9 == 0 { '\n' } else { ' ' });
                }
                let _ = write!(s, "{v:?}");
            }
            s.push('\n');
            out.extend_from_slice(s.as_bytes());
        }
        Encoding::Binary => {
            for v in vals {
                out.extend_from_slice(&v.to_be_bytes());
            }
            out.push(b'\n');
        }
    };
    emit_f64(&mut out, &mut mesh.vertices.iter().flat_map(|v| v.iter().copied()));
    out.extend_from_slice(
        format!("POLYGONS {} {}\n", mesh.n_cells(), 4 * mesh.n_cells()).as_bytes(),
    );
    match encoding {
        Encoding::Ascii => {
            let mut s = String::new();
            for t in &mesh.triangles {
                let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
            }
            out.extend_from_slice(s.as_bytes());
        }
        Encoding::Binary => {
            for t in &mesh.triangles {
                out.extend_from_slice(&3i32.to_be_bytes());
                for &i in t {
                    out.extend_from_slice(&(i as i32).to_be_bytes());
                }
            }
            out.push(b'\n');
        }
    }
    if !mesh.point_fields.is_empty() {
        out.extend_from_slice(format!("POINT_DATA {}\n", mesh.n_points()).as_bytes());
        for f in &mesh.point_fields {
            let name = f.name.replace(' ', "%20");
            out.extend_from_slice(format!("SCALARS {name} double 1\nLOOKUP_TABLE default\n").as_bytes());
            emit_f64(&mut out, &mut f.values.iter().copied());
        }
    }
    out
}

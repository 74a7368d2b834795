//! APF1: the prediction-exchange format between the harness and adapters.
//!
//! Layout (little-endian): magic `APF1`, u32 version, design id, u8 space
//! flag, u64 sample seed, u32 array count, then per array a name, u8 dtype
//! (0 = f32, 1 = f64), u64 element count and the raw payload. A CRC32 of
//! everything before it closes the file.

use std::path::Path;

use thiserror::Error;

use crate::binio::{BinError, ByteReader, ByteWriter};
use crate::geom::Vec3;
use crate::sampling::SampleSet;

pub const MAGIC: &[u8; 4] = b"APF1";
pub const VERSION: u32 = 1;

pub const POINTS: &str = "points";
pub const NORMALS: &str = "normals";
pub const TRUTH: &str = "truth";
pub const PREDICTION: &str = "prediction";
pub const PARAM_COUNT: &str = "param_count";

#[derive(Debug, Error)]
pub enum ApfError {
    #[error("not an APF file (bad magic)")]
    BadMagic,
    #[error("APF version {0} is not supported (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),
    #[error("unknown space flag {0}")]
    UnknownSpace(u8),
    #[error("array '{array}' declares {declared} values but {available} are present")]
    CountMismatch { array: String, declared: u64, available: u64 },
    #[error("missing array '{0}'")]
    MissingArray(String),
    #[error(transparent)]
    Bin(#[from] BinError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Whether values are kinematic pressure or train-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Physical,
    Normalized,
}

impl Space {
    fn code(self) -> u8 {
        match self {
            Space::Physical => 0,
            Space::Normalized => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// One named array. Values are held as f64 whatever the on-disk dtype.
#[derive(Debug, Clone, PartialEq)]
pub struct ApfArray {
    pub name: String,
    pub dtype: Dtype,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApfFile {
    pub design_id: String,
    pub space: Space,
    pub sample_seed: u64,
    pub arrays: Vec<ApfArray>,
}

impl ApfFile {
    pub fn new(design_id: impl Into<String>, space: Space, sample_seed: u64) -> Self {
        ApfFile { design_id: design_id.into(), space, sample_seed, arrays: Vec::new() }
    }

    /// Adds or replaces an f64 array.
    pub fn set(&mut self, name: &str, values: Vec<f64>) {
        self.set_typed(name, Dtype::F64, values);
    }

    pub fn set_typed(&mut self, name: &str, dtype: Dtype, values: Vec<f64>) {
        let arr = ApfArray { name: name.to_string(), dtype, values };
        match self.arrays.iter_mut().find(|a| a.name == name) {
            Some(slot) => *slot = arr,
            None => self.arrays.push(arr),
        }
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.arrays.iter().find(|a| a.name == name).map(|a| a.values.as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64], ApfError> {
        self.get(name).ok_or_else(|| ApfError::MissingArray(name.to_string()))
    }

    /// Model input for one design: points, normals and truth, in physical space.
    pub fn from_sample(sample: &SampleSet) -> Self {
        let mut f = ApfFile::new(sample.design_id.clone(), Space::Physical, sample.seed);
        f.set(POINTS, flatten(&sample.points));
        if let Some(normals) = &sample.normals {
            f.set(NORMALS, flatten(normals));
        }
        f.set(TRUTH, sample.truth.clone());
        f
    }

    pub fn points(&self) -> Result<Vec<Vec3>, ApfError> {
        let flat = self.require(POINTS)?;
        if flat.len() % 3 != 0 {
            return Err(ApfError::CountMismatch {
                array: POINTS.into(),
                declared: flat.len() as u64,
                available: (flat.len() - flat.len() % 3) as u64,
            });
        }
        Ok(flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    /// The scored content of an adapter's output file.
    pub fn prediction(&self) -> Result<PredictionFile, ApfError> {
        Ok(PredictionFile {
            design_id: self.design_id.clone(),
            values: self.require(PREDICTION)?.to_vec(),
            space: self.space,
            sample_seed: self.sample_seed,
            param_count: self.get(PARAM_COUNT).and_then(|v| v.first().copied()),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: usize = self.arrays.iter().map(|a| a.values.len() * a.dtype.size() + a.name.len() + 13).sum();
        let mut w = ByteWriter::with_capacity(payload + self.design_id.len() + 32);
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.string(&self.design_id);
        w.u8(self.space.code());
        w.u64(self.sample_seed);
        w.u32(self.arrays.len() as u32);
        for a in &self.arrays {
            w.string(&a.name);
            w.u8(a.dtype.code());
            w.u64(a.values.len() as u64);
            match a.dtype {
                Dtype::F32 => a.values.iter().for_each(|&v| w.f32(v as f32)),
                Dtype::F64 => a.values.iter().for_each(|&v| w.f64(v)),
            }
        }
        w.finish_with_crc()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ApfError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(ApfError::BadMagic);
        }
        let payload = ByteReader::new(bytes).verify_crc()?;
        let mut r = ByteReader::new(&payload[4..]);
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(ApfError::UnsupportedVersion(version));
        }
        let design_id = r.string("design id")?;
        let space = match r.u8("space flag")? {
            0 => Space::Physical,
            1 => Space::Normalized,
            other => return Err(ApfError::UnknownSpace(other)),
        };
        let sample_seed = r.u64("sample seed")?;
        let n_arrays = r.u32("array count")?;
        let mut file = ApfFile::new(design_id, space, sample_seed);
        for _ in 0..n_arrays {
            let name = r.string("array name")?;
            let dtype = match r.u8("dtype")? {
                0 => Dtype::F32,
                1 => Dtype::F64,
                other => return Err(ApfError::UnknownDtype(other)),
            };
            let declared = r.u64("element count")?;
            let available = (r.remaining() / dtype.size()) as u64;
            if declared > available {
                return Err(ApfError::CountMismatch { array: name, declared, available });
            }
            let raw = r.take(declared as usize * dtype.size(), "array payload")?;
            let values = match dtype {
                Dtype::F32 => raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
                Dtype::F64 => raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
            };
            file.arrays.push(ApfArray { name, dtype, values });
        }
        if !r.is_empty() {
            return Err(ApfError::CountMismatch {
                array: "<trailing bytes>".into(),
                declared: 0,
                available: r.remaining() as u64,
            });
        }
        Ok(file)
    }
}

/// Typed view of an adapter's answer for one design.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionFile {
    pub design_id: String,
    pub values: Vec<f64>,
    pub space: Space,
    pub sample_seed: u64,
    pub param_count: Option<f64>,
}

impl PredictionFile {
    pub fn n(&self) -> usize {
        self.values.len()
    }
}

pub fn write_apf(path: &Path, file: &ApfFile) -> Result<(), ApfError> {
    std::fs::write(path, file.to_bytes())?;
    Ok(())
}

pub fn read_apf(path: &Path) -> Result<ApfFile, ApfError> {
    ApfFile::from_bytes(&std::fs::read(path)?)
}

fn flatten(v: &[Vec3]) -> Vec<f64> {
    v.iter().flat_map(|p| p.iter().copied()).collect()
}

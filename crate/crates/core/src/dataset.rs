//! Manifests, train/val/test splits and train-only pressure statistics.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mesh::{self, native, vtk, Category, MeshError, SurfaceMesh};
use crate::numeric::{quantile_sorted, Moments};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("design '{id}' appears in both {first} and {second}")]
    OverlappingSplits { id: String, first: &'static str, second: &'static str },
    #[error("design '{0}' is not in the manifest")]
    UnknownDesignId(String),
    #[error("duplicate design id '{0}' in manifest")]
    DuplicateDesignId(String),
    #[error("design '{design}' has no point field '{field}'")]
    MissingField { design: String, field: String },
    #[error("training split is empty")]
    EmptyTrainSplit,
    #[error("pressure std is zero; cannot normalise")]
    ZeroVariance,
    #[error("no designs in category {0}")]
    EmptyCategory(Category),
    #[error("category {0} requested for both training and testing")]
    OverlappingCategories(Category),
    #[error("failed to load mesh for '{design}': {source}")]
    Mesh { design: String, source: MeshError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub category: Category,
    pub path: String,
}

/// Dataset manifest. Entry paths are relative to the manifest's directory
/// unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(rename = "dataset")]
    pub dataset_name: String,
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    pub root: PathBuf,
}

impl Manifest {
    pub fn new(dataset_name: impl Into<String>, entries: Vec<ManifestEntry>, root: impl Into<PathBuf>) -> Result<Self, DatasetError> {
        let m = Manifest { dataset_name: dataset_name.into(), entries, root: root.into() };
        let mut seen = HashSet::new();
        for e in &m.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(DatasetError::DuplicateDesignId(e.id.clone()));
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let parsed: Manifest = serde_json::from_str(&text)
            .map_err(|e| DatasetError::Parse { path: path.to_path_buf(), msg: e.to_string() })?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Manifest::new(parsed.dataset_name, parsed.entries, root)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises")
    }

    pub fn entry(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// Entries whose file does not exist.
    pub fn missing_files(&self) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| !self.resolve(e).is_file()).collect()
    }

    /// Loads one design; the manifest category overrides the id prefix.
    pub fn load_mesh(&self, id: &str) -> Result<SurfaceMesh, DatasetError> {
        let entry = self.entry(id).ok_or_else(|| DatasetError::UnknownDesignId(id.to_string()))?;
        let mesh = load_mesh_file(&self.resolve(entry), id)
            .map_err(|source| DatasetError::Mesh { design: id.to_string(), source })?;
        Ok(mesh.with_category(entry.category))
    }

    /// Position of each id in manifest order.
    pub fn order(&self) -> HashMap<&str, usize> {
        self.entries.iter().enumerate().map(|(i, e)| (e.id.as_str(), i)).collect()
    }
}

/// Reads a mesh file, choosing the codec by content (ABM1 magic) or
/// falling back to legacy VTK.
pub fn load_mesh_file(path: &Path, design_id: &str) -> Result<SurfaceMesh, MeshError> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(&native::MAGIC) {
        let mut m = native::parse_native(&bytes)?;
        if m.design_id != design_id {
            m.design_id = design_id.to_string();
        }
        Ok(m)
    } else {
        vtk::parse_vtk_polydata(&bytes, design_id, vtk::VtkOptions::default())
    }
}

/// Disjoint train/validation/test id lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub name: String,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    pub fn new(name: impl Into<String>, train: Vec<String>, val: Vec<String>, test: Vec<String>) -> Result<Self, DatasetError> {
        let s = Split { name: name.into(), train, val, test };
        s.check_disjoint()?;
        Ok(s)
    }

    fn check_disjoint(&self) -> Result<(), DatasetError> {
        let mut owner: HashMap<&str, &'static str> = HashMap::new();
        for (list, label) in [(&self.train, "train"), (&self.val, "val"), (&self.test, "test")] {
            for id in list {
                if let Some(&first) = owner.get(id.as_str()) {
                    if first != label {
                        return Err(DatasetError::OverlappingSplits { id: id.clone(), first, second: label });
                    }
                }
                owner.insert(id, label);
            }
        }
        Ok(())
    }

    pub fn check_against(&self, manifest: &Manifest) -> Result<(), DatasetError> {
        let known: HashSet<&str> = manifest.ids().collect();
        for id in self.train.iter().chain(&self.val).chain(&self.test) {
            if !known.contains(id.as_str()) {
                return Err(DatasetError::UnknownDesignId(id.clone()));
            }
        }
        Ok(())
    }

    /// SHA-256 over the sorted, de-duplicated training ids. Reordering the
    /// list leaves it unchanged; adding or removing an id changes it.
    pub fn train_hash(&self) -> String {
        train_ids_hash(&self.train)
    }
}

pub fn train_ids_hash(ids: &[String]) -> String {
    let set: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    let mut h = Sha256::new();
    for id in set {
        h.update(id.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct LoadedSplit {
    pub split: Split,
    /// Ids dropped because they were listed twice in the same list.
    pub duplicates_removed: usize,
}

#[derive(Deserialize)]
struct SplitJson {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    train: Vec<String>,
    #[serde(default)]
    val: Vec<String>,
    #[serde(default)]
    test: Vec<String>,
}

fn dedup(list: Vec<String>, removed: &mut usize) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(list.len());
    for id in list {
        if seen.insert(id.clone()) {
            out.push(id);
        } else {
            *removed += 1;
        }
    }
    out
}

fn read_id_list(path: &Path) -> Result<Vec<String>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

fn find_list(dir: &Path, stem: &str) -> Option<PathBuf> {
    [format!("{stem}.txt"), format!("{stem}_design_ids.txt")]
        .into_iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
}

/// Loads a split from a JSON file or from a directory holding
/// `train.txt`/`val.txt`/`test.txt` (or `*_design_ids.txt`) id lists.
pub fn load_split(path: &Path, manifest: Option<&Manifest>) -> Result<LoadedSplit, DatasetError> {
    let (name, train, val, test) = if path.is_dir() {
        let list = |stem: &str| -> Result<Vec<String>, DatasetError> {
            match find_list(path, stem) {
                Some(p) => read_id_list(&p),
                None => Ok(Vec::new()),
            }
        };
        let name = path.file_name().map_or("split".into(), |n| n.to_string_lossy().into_owned());
        (name, list("train")?, list("val")?, list("test")?)
    } else {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let j: SplitJson = serde_json::from_str(&text)
            .map_err(|e| DatasetError::Parse { path: path.to_path_buf(), msg: e.to_string() })?;
        let name = j
            .name
            .unwrap_or_else(|| path.file_stem().map_or("split".into(), |n| n.to_string_lossy().into_owned()));
        (name, j.train, j.val, j.test)
    };
    let mut removed = 0;
    let split = Split::new(name, dedup(train, &mut removed), dedup(val, &mut removed), dedup(test, &mut removed))?;
    if let Some(m) = manifest {
        split.check_against(m)?;
    }
    Ok(LoadedSplit { split, duplicates_removed: removed })
}

/// Pooled kinematic-pressure statistics over the training designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureStats {
    /// m²/s²
    pub mean: f64,
    /// Population standard deviation, m²/s².
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub n_points_total: u64,
    pub n_designs: usize,
}

impl PressureStats {
    /// Statistics of the concatenation of `designs`. Moments are merged in
    /// slice order; quantiles come from the sorted pooled array.
    pub fn from_designs(designs: &[&[f64]]) -> Result<Self, DatasetError> {
        if designs.is_empty() || designs.iter().all(|d| d.is_empty()) {
            return Err(DatasetError::EmptyTrainSplit);
        }
        let partials: Vec<Moments> = designs.par_iter().map(|d| Moments::from_slice(d)).collect();
        let mut moments = Moments::default();
        for p in &partials {
            moments.merge(p);
        }
        let mut pooled: Vec<f64> = designs.iter().flat_map(|d| d.iter().copied()).collect();
        pooled.par_sort_unstable_by(f64::total_cmp);
        Ok(PressureStats {
            mean: moments.mean,
            std: moments.population_variance().sqrt(),
            min: pooled[0],
            max: pooled[pooled.len() - 1],
            median: quantile_sorted(&pooled, 0.5),
            q25: quantile_sorted(&pooled, 0.25),
            q75: quantile_sorted(&pooled, 0.75),
            n_points_total: moments.count,
            n_designs: designs.len(),
        })
    }

    pub fn normalize(&self, values: &[f64]) -> Result<Vec<f64>, DatasetError> {
        if !(self.std > 0.0) {
            return Err(DatasetError::ZeroVariance);
        }
        Ok(values.iter().map(|v| (v - self.mean) / self.std).collect())
    }

    pub fn denormalize(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| v * self.std + self.mean).collect()
    }
}

/// Loads every training mesh and pools `field` across them.
///
/// Only ids in `train` are touched, so validation and test files can be
/// missing or corrupt without affecting the result.
pub fn compute_pressure_stats(manifest: &Manifest, train: &[String], field: &str) -> Result<PressureStats, DatasetError> {
    if train.is_empty() {
        return Err(DatasetError::EmptyTrainSplit);
    }
    let order = manifest.order();
    let mut ids: Vec<&String> = train.iter().collect();
    for id in &ids {
        if !order.contains_key(id.as_str()) {
            return Err(DatasetError::UnknownDesignId((*id).clone()));
        }
    }
    ids.sort_by_key(|id| order[id.as_str()]);
    let fields: Vec<Vec<f64>> = ids
        .par_iter()
        .map(|id| {
            let mesh = manifest.load_mesh(id)?;
            mesh.field(field)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| DatasetError::MissingField { design: (*id).clone(), field: field.to_string() })
        })
        .collect::<Result<_, _>>()?;
    let refs: Vec<&[f64]> = fields.iter().map(Vec::as_slice).collect();
    PressureStats::from_designs(&refs)
}

/// Stats cache record: the statistics plus enough to detect staleness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsCache {
    #[serde(flatten)]
    pub stats: PressureStats,
    pub field: String,
    pub split_name: String,
    pub train_hash: String,
    pub std_convention: String,
}

impl StatsCache {
    pub fn new(stats: PressureStats, field: &str, split: &Split) -> Self {
        StatsCache {
            stats,
            field: field.to_string(),
            split_name: split.name.clone(),
            train_hash: split.train_hash(),
            std_convention: "population".into(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        let text = serde_json::to_string_pretty(self).expect("stats serialise") + "\n";
        std::fs::write(path, text).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| DatasetError::Parse { path: path.to_path_buf(), msg: e.to_string() })
    }

    /// True when the cache was computed from this split's training ids and field.
    pub fn matches(&self, split: &Split, field: &str) -> bool {
        self.train_hash == split.train_hash() && self.field == field
    }
}

/// A cross-category split with its size bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCategorySplit {
    pub split: Split,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    /// train_size / test_size
    pub ratio: f64,
}

pub fn category_set_label(cats: &[Category]) -> String {
    let set: BTreeSet<Category> = cats.iter().copied().collect();
    set.iter().map(|c| c.letter()).collect()
}

impl fmt::Display for CrossCategorySplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (train {}, test {}, ratio {:.2})", self.split.name, self.train_size, self.test_size, self.ratio)
    }
}

/// Zero-shot split: train on `train_categories`, test on
/// `test_categories`. `floor(val_fraction * pool)` of the training pool is
/// moved to validation using a seeded shuffle. With `train_multiple = Some(m)`
/// the training set is then cut down to a multiple of `m` (a batch size) and
/// the surplus also goes to validation.
pub fn make_cross_category_split(
    manifest: &Manifest,
    train_categories: &[Category],
    test_categories: &[Category],
    val_fraction: f64,
    train_multiple: Option<usize>,
    seed: u64,
) -> Result<CrossCategorySplit, DatasetError> {
    for c in train_categories {
        if test_categories.contains(c) {
            return Err(DatasetError::OverlappingCategories(*c));
        }
    }
    for &c in train_categories.iter().chain(test_categories) {
        if !manifest.entries.iter().any(|e| e.category == c) {
            return Err(DatasetError::EmptyCategory(c));
        }
    }
    let pool: Vec<String> = manifest
        .entries
        .iter()
        .filter(|e| train_categories.contains(&e.category))
        .map(|e| e.id.clone())
        .collect();
    let test: Vec<String> = manifest
        .entries
        .iter()
        .filter(|e| test_categories.contains(&e.category))
        .map(|e| e.id.clone())
        .collect();
    let mut n_val = ((pool.len() as f64) * val_fraction.clamp(0.0, 1.0)).floor() as usize;
    if let Some(m) = train_multiple.filter(|&m| m > 1) {
        n_val = pool.len() - (pool.len() - n_val) / m * m;
    }
    let mut shuffled: Vec<usize> = (0..pool.len()).collect();
    shuffled.shuffle(&mut crate::rng::design_stream(seed, "cross-category-val"));
    let mut is_val = vec![false; pool.len()];
    for &i in &shuffled[..n_val] {
        is_val[i] = true;
    }
    let (val, train): (Vec<_>, Vec<_>) = pool.into_iter().zip(is_val).partition(|(_, v)| *v);
    let train: Vec<String> = train.into_iter().map(|(id, _)| id).collect();
    let val: Vec<String> = val.into_iter().map(|(id, _)| id).collect();
    let name = format!(
        "crosscat_{}_to_{}",
        category_set_label(train_categories),
        category_set_label(test_categories)
    );
    let (train_size, val_size, test_size) = (train.len(), val.len(), test.len());
    Ok(CrossCategorySplit {
        split: Split::new(name, train, val, test)?,
        train_size,
        val_size,
        test_size,
        ratio: train_size as f64 / test_size as f64,
    })
}

/// Writes a split as JSON (used to hand splits to adapters).
pub fn write_split_json(split: &Split, path: &Path) -> Result<(), DatasetError> {
    let text = serde_json::to_string_pretty(split).expect("split serialises") + "\n";
    std::fs::write(path, text).map_err(io_err(path))
}

/// Geometry statistics of every manifest design, in manifest order.
pub fn manifest_geometry(manifest: &Manifest) -> Vec<(String, Result<mesh::GeometryStats, DatasetError>)> {
    manifest
        .entries
        .par_iter()
        .map(|e| (e.id.clone(), manifest.load_mesh(&e.id).map(|m| mesh::geometry_stats(&m))))
        .collect()
}

//! Synthetic car-like fixtures with analytic pressure fields, and an
//! inverse-distance-weighting baseline predictor.
//!
//! Bodies are boxes whose roof drops along a rear slope; the slope angle
//! range is what tells the three archetypes apart. The generated tree
//! (`manifest.json`, ABM1 meshes, `split.json`) is the same shape as a real
//! dataset, so everything downstream treats fixtures like real data.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{self, DatasetError, Manifest, ManifestEntry, Split};
use crate::geom::{self, Vec3};
use crate::mesh::{native, shapes, Category, SurfaceMesh};
use crate::rng::design_stream;
use crate::sampling::{KdTree, SampleSet};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("the IDW training pool has no points")]
    EmptyTrainingPool,
    #[error("k must be at least 1")]
    ZeroNeighbours,
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Parameters of the analytic pressure model, kinematic units (m²/s²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldModel {
    pub offset: f64,
    pub stagnation_amplitude: f64,
    /// Gaussian radius of the stagnation bump, m.
    pub stagnation_length: f64,
    pub wake_deficit: f64,
    pub noise_sigma: f64,
}

impl Default for FieldModel {
    fn default() -> Self {
        FieldModel {
            offset: -60.0,
            stagnation_amplitude: 420.0,
            stagnation_length: 0.6,
            wake_deficit: 300.0,
            noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub dataset_name: String,
    pub field_name: String,
    pub n_fastback: usize,
    pub n_estateback: usize,
    pub n_notchback: usize,
    /// Inclusive vertex-count range; a box with `d` divisions per edge has
    /// `6d² + 2` vertices.
    pub vertex_budget: [usize; 2],
    pub length_m: [f64; 2],
    pub width_m: [f64; 2],
    pub height_m: [f64; 2],
    /// Rear-slope angle ranges from horizontal, degrees.
    pub slope_deg_fastback: [f64; 2],
    pub slope_deg_notchback: [f64; 2],
    pub slope_deg_estateback: [f64; 2],
    pub field: FieldModel,
    /// Train / val / test fractions for the bundled split, per category.
    pub split_fractions: [f64; 3],
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            dataset_name: "synthetic".into(),
            field_name: "p".into(),
            n_fastback: 34,
            n_estateback: 33,
            n_notchback: 33,
            vertex_budget: [800, 2500],
            length_m: [4.2, 4.8],
            width_m: [1.75, 1.95],
            height_m: [1.35, 1.5],
            slope_deg_fastback: [14.0, 22.0],
            slope_deg_notchback: [30.0, 40.0],
            slope_deg_estateback: [62.0, 75.0],
            field: FieldModel::default(),
            split_fractions: [0.7, 0.1, 0.2],
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if self.n_fastback + self.n_estateback + self.n_notchback == 0 {
            return bad("no designs requested");
        }
        let [lo, hi] = self.divisions_range();
        if lo > hi || lo < 2 {
            return bad("vertex budget admits no box resolution (need 6d²+2 within range, d ≥ 2)");
        }
        for (name, r) in [
            ("length_m", self.length_m),
            ("width_m", self.width_m),
            ("height_m", self.height_m),
            ("slope_deg_fastback", self.slope_deg_fastback),
            ("slope_deg_notchback", self.slope_deg_notchback),
            ("slope_deg_estateback", self.slope_deg_estateback),
        ] {
            if !(r[0] > 0.0 && r[0] <= r[1]) {
                return Err(SynthError::InvalidSpec(format!("{name} must be a positive, ordered range")));
            }
        }
        if self.slope_deg_fastback[1] >= 90.0 || self.slope_deg_notchback[1] >= 90.0 || self.slope_deg_estateback[1] >= 90.0 {
            return bad("slope angles must stay below 90°");
        }
        if !(self.field.stagnation_length > 0.0) || self.field.noise_sigma < 0.0 {
            return bad("stagnation_length must be positive and noise_sigma non-negative");
        }
        let s: f64 = self.split_fractions.iter().sum();
        if self.split_fractions.iter().any(|f| *f < 0.0) || (s - 1.0).abs() > 1e-9 {
            return bad("split fractions must be non-negative and sum to 1");
        }
        Ok(())
    }

    fn divisions_range(&self) -> [usize; 2] {
        let lo = (((self.vertex_budget[0].saturating_sub(2)) as f64 / 6.0).sqrt()).ceil() as usize;
        let hi = (((self.vertex_budget[1].saturating_sub(2)) as f64 / 6.0).sqrt()).floor() as usize;
        [lo, hi]
    }

    fn slope_range(&self, c: Category) -> [f64; 2] {
        match c {
            Category::Fastback => self.slope_deg_fastback,
            Category::Notchback => self.slope_deg_notchback,
            _ => self.slope_deg_estateback,
        }
    }

    fn counts(&self) -> [(Category, usize); 3] {
        [
            (Category::Estateback, self.n_estateback),
            (Category::Fastback, self.n_fastback),
            (Category::Notchback, self.n_notchback),
        ]
    }
}

const GROUND_CLEARANCE: f64 = 0.15;

/// Shape of one generated design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDesign {
    pub id: String,
    pub category: Category,
    pub divisions: usize,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub slope_deg: f64,
}

impl SynthDesign {
    /// Where the roof starts dropping, m from the nose.
    pub fn slope_start(&self) -> f64 {
        let tan = self.slope_deg.to_radians().tan();
        self.length - (0.5 * self.height / tan).min(0.45 * self.length)
    }

    /// Roof height at streamwise position `x`.
    pub fn roof(&self, x: f64) -> f64 {
        self.height - self.slope_deg.to_radians().tan() * (x - self.slope_start()).max(0.0)
    }

    /// Maps the unit cube onto the body: x from nose (0) to tail, y across,
    /// z from the underbody up to the roof line.
    pub fn place(&self, u: Vec3) -> Vec3 {
        let x = u[0] * self.length;
        let y = (u[1] - 0.5) * self.width;
        let z = GROUND_CLEARANCE + u[2] * (self.roof(x) - GROUND_CLEARANCE);
        [x, y, z]
    }

    pub fn stagnation_point(&self) -> Vec3 {
        [0.0, 0.0, GROUND_CLEARANCE + 0.35 * (self.height - GROUND_CLEARANCE)]
    }

    /// Noise-free pressure at `x`: a stagnation bump at the nose minus a
    /// roof/rear suction term whose shape depends on the slope angle.
    pub fn pressure(&self, model: &FieldModel, x: Vec3) -> f64 {
        let d2 = geom::dist2(x, self.stagnation_point());
        let stagnation = model.stagnation_amplitude * (-d2 / (model.stagnation_length * model.stagnation_length)).exp();
        model.offset + stagnation - model.wake_deficit * self.suction(x)
    }

    fn suction(&self, x: Vec3) -> f64 {
        let alpha = self.slope_deg.to_radians();
        let h = (x[2] / self.height).clamp(0.0, 1.5);
        let along = (x[0] - self.slope_start()) / (0.3 * self.length);
        let roof = h.powi(4) * (-along * along).exp() * (0.5 + 0.5 * alpha.cos());
        let tail = 1.0 / (1.0 + (-(x[0] - (self.length - 0.25)) / 0.08).exp());
        roof + 0.6 * tail * (0.4 + 0.6 * alpha.sin())
    }

    pub fn mesh(&self, model: &FieldModel, field_name: &str, noise_seed: u64) -> SurfaceMesh {
        let mut m = shapes::subdivided_box(self.divisions, |u| self.place(u));
        m.design_id = self.id.clone();
        m.category = self.category;
        let mut values: Vec<f64> = m.vertices.iter().map(|&v| self.pressure(model, v)).collect();
        if model.noise_sigma > 0.0 {
            let mut rng = design_stream(noise_seed, &format!("{}/noise", self.id));
            let normal = Normal::new(0.0, model.noise_sigma).expect("sigma checked");
            for v in &mut values {
                *v += normal.sample(&mut rng);
            }
        }
        m.set_field(field_name, values).expect("one value per vertex");
        m
    }
}

/// Shape parameters for every design, sorted by id.
pub fn design_parameters(spec: &SyntheticSpec, seed: u64) -> Result<Vec<SynthDesign>, SynthError> {
    spec.validate()?;
    let [dlo, dhi] = spec.divisions_range();
    let mut out = Vec::new();
    for (cat, n) in spec.counts() {
        for k in 0..n {
            let id = format!("{}_SYN_{:04}", cat.letter(), k);
            let mut rng = design_stream(seed, &id);
            let mut draw = |r: [f64; 2]| if r[0] == r[1] { r[0] } else { rng.gen_range(r[0]..r[1]) };
            let length = draw(spec.length_m);
            let width = draw(spec.width_m);
            let height = draw(spec.height_m);
            let slope_deg = draw(spec.slope_range(cat));
            let divisions = rng.gen_range(dlo..=dhi);
            out.push(SynthDesign { id, category: cat, divisions, length, width, height, slope_deg });
        }
    }
    Ok(out)
}

/// What [`generate`] wrote.
#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub manifest_path: PathBuf,
    pub split_path: PathBuf,
    pub designs: Vec<SynthDesign>,
    pub manifest: Manifest,
    pub split: Split,
}

/// Writes `manifest.json`, `meshes/<id>.abm`, `split.json` and
/// `designs.json` under `out_dir`. Output bytes depend only on
/// `(spec, seed)`.
pub fn generate(spec: &SyntheticSpec, seed: u64, out_dir: &Path) -> Result<GeneratedDataset, SynthError> {
    let designs = design_parameters(spec, seed)?;
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SynthError::Io { path, source }
    };
    let mesh_dir = out_dir.join("meshes");
    std::fs::create_dir_all(&mesh_dir).map_err(io(&mesh_dir))?;

    designs.par_iter().try_for_each(|d| {
        let m = d.mesh(&spec.field, &spec.field_name, seed);
        let path = mesh_dir.join(format!("{}.abm", d.id));
        std::fs::write(&path, native::write_native(&m)).map_err(io(&path))
    })?;

    let entries = designs
        .iter()
        .map(|d| ManifestEntry { id: d.id.clone(), category: d.category, path: format!("meshes/{}.abm", d.id) })
        .collect();
    let manifest = Manifest::new(spec.dataset_name.clone(), entries, out_dir)?;
    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(&manifest_path, manifest.to_json() + "\n").map_err(io(&manifest_path))?;

    let split = stratified_split(&designs, spec.split_fractions, seed)?;
    let split_path = out_dir.join("split.json");
    dataset::write_split_json(&split, &split_path)?;

    let params_path = out_dir.join("designs.json");
    let params = serde_json::json!({ "seed": seed, "spec": spec, "designs": designs });
    std::fs::write(&params_path, serde_json::to_string_pretty(&params).expect("serialisable") + "\n")
        .map_err(io(&params_path))?;

    Ok(GeneratedDataset { manifest_path, split_path, designs, manifest, split })
}

/// Per-category shuffled split: `floor(f · n)` designs to val and test,
/// the remainder to train.
pub fn stratified_split(designs: &[SynthDesign], fractions: [f64; 3], seed: u64) -> Result<Split, SynthError> {
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for cat in Category::ALL {
        let mut ids: Vec<String> = designs.iter().filter(|d| d.category == cat).map(|d| d.id.clone()).collect();
        if ids.is_empty() {
            continue;
        }
        rand::seq::SliceRandom::shuffle(&mut ids[..], &mut design_stream(seed, &format!("synthetic-split/{}", cat.letter())));
        let n = ids.len() as f64;
        let n_val = (fractions[1] * n).floor() as usize;
        let n_test = (fractions[2] * n).floor() as usize;
        test.extend(ids.drain(..n_test));
        val.extend(ids.drain(..n_val));
        train.extend(ids);
    }
    for v in [&mut train, &mut val, &mut test] {
        v.sort();
    }
    Ok(Split::new("synthetic", train, val, test)?)
}

pub const DEFAULT_IDW_K: usize = 8;
pub const DEFAULT_IDW_POWER: f64 = 2.0;

/// Inverse-distance weighting over the pooled points of the training
/// designs.
#[derive(Debug, Clone)]
pub struct IdwModel {
    tree: KdTree,
    values: Vec<f64>,
    k: usize,
    power: f64,
}

impl IdwModel {
    /// Pools training samples in the given order; pass them sorted by
    /// design id for reproducible tie-breaks.
    pub fn fit(train: &[SampleSet], k: usize, power: f64) -> Result<Self, SynthError> {
        if k == 0 {
            return Err(SynthError::ZeroNeighbours);
        }
        let points: Vec<Vec3> = train.iter().flat_map(|s| s.points.iter().copied()).collect();
        let values: Vec<f64> = train.iter().flat_map(|s| s.truth.iter().copied()).collect();
        let tree = KdTree::build(points).ok_or(SynthError::EmptyTrainingPool)?;
        Ok(IdwModel { tree, values, k, power })
    }

    pub fn n_points(&self) -> usize {
        self.values.len()
    }

    pub fn predict_one(&self, q: Vec3) -> f64 {
        let nn = self.tree.knn(q, self.k);
        if nn[0].1 == 0.0 || nn.len() == 1 {
            return self.values[nn[0].0];
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &(i, d) in &nn {
            let w = d.powf(-self.power);
            num += w * self.values[i];
            den += w;
        }
        num / den
    }

    pub fn predict(&self, queries: &[Vec3]) -> Vec<f64> {
        queries.par_iter().map(|&q| self.predict_one(q)).collect()
    }
}

pub fn idw_predict(train: &[SampleSet], queries: &[Vec3], k: usize, power: f64) -> Result<Vec<f64>, SynthError> {
    Ok(IdwModel::fit(train, k, power)?.predict(queries))
}

/// Vertices of a box body with `divisions` per edge.
pub fn vertex_count(divisions: usize) -> usize {
    6 * divisions * divisions + 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{build_index, sample_vertices};
    use proptest::prelude::*;

    fn small_spec() -> SyntheticSpec {
        SyntheticSpec { n_fastback: 3, n_estateback: 2, n_notchback: 2, vertex_budget: [200, 700], ..Default::default() }
    }

    #[test]
    fn same_seed_same_bytes() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ga = generate(&small_spec(), 7, a.path()).unwrap();
        generate(&small_spec(), 7, b.path()).unwrap();
        for name in ["manifest.json", "split.json", "designs.json"] {
            assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
        }
        for d in &ga.designs {
            let rel = format!("meshes/{}.abm", d.id);
            assert_eq!(std::fs::read(a.path().join(&rel)).unwrap(), std::fs::read(b.path().join(&rel)).unwrap());
        }
        let c = tempfile::tempdir().unwrap();
        generate(&small_spec(), 8, c.path()).unwrap();
        assert_ne!(std::fs::read(a.path().join("designs.json")).unwrap(), std::fs::read(c.path().join("designs.json")).unwrap());
    }

    #[test]
    fn zero_noise_field_is_the_formula() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small_spec();
        let g = generate(&spec, 3, dir.path()).unwrap();
        let manifest = Manifest::load(&g.manifest_path).unwrap();
        for d in &g.designs {
            let m = manifest.load_mesh(&d.id).unwrap();
            assert_eq!(m.category, d.category);
            let stored = m.field("p").unwrap();
            for (v, s) in m.vertices.iter().zip(stored) {
                assert!((d.pressure(&spec.field, *v) - s).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn meshes_are_closed_and_sized() {
        let spec = small_spec();
        for d in design_parameters(&spec, 11).unwrap() {
            let m = d.mesh(&spec.field, "p", 11);
            assert_eq!(m.n_points(), vertex_count(d.divisions));
            assert!((200..=700).contains(&m.n_points()));
            let mut edges = std::collections::HashMap::new();
            for t in &m.triangles {
                for k in 0..3 {
                    *edges.entry((t[k], t[(k + 1) % 3])).or_insert(0) += 1;
                }
            }
            assert!(edges.iter().all(|(&(a, b), &c)| c == 1 && edges.contains_key(&(b, a))));
            assert!(m.degenerate_faces().is_empty());
        }
    }

    #[test]
    fn categories_follow_slope_ranges() {
        let spec = SyntheticSpec::default();
        let designs = design_parameters(&spec, 1).unwrap();
        assert_eq!(designs.len(), 100);
        for d in &designs {
            let r = spec.slope_range(d.category);
            assert!(d.slope_deg >= r[0] && d.slope_deg <= r[1]);
            assert_eq!(Category::from_design_id(&d.id), d.category);
        }
        let count = |c| designs.iter().filter(|d| d.category == c).count();
        assert_eq!((count(Category::Fastback), count(Category::Estateback), count(Category::Notchback)), (34, 33, 33));
    }

    #[test]
    fn split_is_stratified() {
        let designs = design_parameters(&SyntheticSpec::default(), 5).unwrap();
        let s = stratified_split(&designs, [0.7, 0.1, 0.2], 5).unwrap();
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), 100);
        // floor(0.2·34) + 2·floor(0.2·33), floor(0.1·34) + 2·floor(0.1·33)
        assert_eq!(s.test.len(), 6 + 6 + 6);
        assert_eq!(s.val.len(), 3 + 3 + 3);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(SyntheticSpec { vertex_budget: [10, 20], ..Default::default() }.validate().is_err());
        assert!(SyntheticSpec { slope_deg_fastback: [30.0, 20.0], ..Default::default() }.validate().is_err());
        assert!(SyntheticSpec { split_fractions: [0.5, 0.5, 0.5], ..Default::default() }.validate().is_err());
        assert!(SyntheticSpec { n_fastback: 0, n_estateback: 0, n_notchback: 0, ..Default::default() }.validate().is_err());
    }

    fn fixture_samples(n_designs: usize) -> Vec<SampleSet> {
        let spec = SyntheticSpec { n_fastback: n_designs, n_estateback: 0, n_notchback: 0, vertex_budget: [200, 400], ..Default::default() };
        design_parameters(&spec, 2)
            .unwrap()
            .iter()
            .map(|d| sample_vertices(&d.mesh(&spec.field, "p", 2), "p", 150, 2).unwrap())
            .collect()
    }

    #[test]
    fn idw_exact_match_and_k1() {
        let train = fixture_samples(3);
        let model = IdwModel::fit(&train, 8, 2.0).unwrap();
        for s in &train {
            for (p, t) in s.points.iter().zip(&s.truth) {
                assert_eq!(model.predict_one(*p), *t);
            }
        }
        let pooled: Vec<Vec3> = train.iter().flat_map(|s| s.points.clone()).collect();
        let values: Vec<f64> = train.iter().flat_map(|s| s.truth.clone()).collect();
        let index = build_index(&pooled).unwrap();
        let queries: Vec<Vec3> = (0..50).map(|i| [i as f64 * 0.09, 0.3 - 0.01 * i as f64, 0.2 + 0.02 * i as f64]).collect();
        let k1 = idw_predict(&train, &queries, 1, 2.0).unwrap();
        for (q, p) in queries.iter().zip(k1) {
            assert_eq!(p, values[index.nearest(*q).0]);
        }
    }

    #[test]
    fn idw_errors() {
        assert!(matches!(idw_predict(&[], &[[0.0; 3]], 8, 2.0), Err(SynthError::EmptyTrainingPool)));
        let train = fixture_samples(1);
        assert!(matches!(idw_predict(&train, &[[0.0; 3]], 0, 2.0), Err(SynthError::ZeroNeighbours)));
    }

    proptest! {
        #[test]
        fn idw_is_a_convex_combination(qx in -1.0f64..6.0, qy in -2.0f64..2.0, qz in -0.5f64..2.0, c in -500.0f64..500.0) {
            let mut train = fixture_samples(2);
            let model = IdwModel::fit(&train, 8, 2.0).unwrap();
            let pooled: Vec<f64> = train.iter().flat_map(|s| s.truth.clone()).collect();
            let nn = model.tree.knn([qx, qy, qz], 8);
            let lo = nn.iter().map(|&(i, _)| pooled[i]).fold(f64::INFINITY, f64::min);
            let hi = nn.iter().map(|&(i, _)| pooled[i]).fold(f64::NEG_INFINITY, f64::max);
            let p = model.predict_one([qx, qy, qz]);
            prop_assert!(p >= lo - 1e-9 * lo.abs().max(1.0) && p <= hi + 1e-9 * hi.abs().max(1.0));

            for s in &mut train {
                s.truth.iter_mut().for_each(|v| *v = c);
            }
            let constant = IdwModel::fit(&train, 8, 2.0).unwrap().predict_one([qx, qy, qz]);
            prop_assert!((constant - c).abs() <= 1e-12 * c.abs().max(1.0));
        }
    }
}

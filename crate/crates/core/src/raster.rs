//! Multiband rasters, ground truth, training-set sampling and synthetic
//! scenes.
//!
//! On disk a raster is a small JSON descriptor next to a raw little-endian
//! payload in band-sequential order:
//!
//! ```json
//! {"width": 4, "height": 3, "bands": 2, "dtype": "f32",
//!  "layout": "band-sequential", "endianness": "little", "data": "image.bin"}
//! ```
//!
//! Label rasters (ground truth, classifier output) use the same container
//! with one `u16` band.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::ClassId;
use crate::induction::LabeledSample;

pub const LAYOUT: &str = "band-sequential";
pub const ENDIANNESS: &str = "little";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    U8,
    U16,
    F32,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U16 => 2,
            Dtype::F32 => 4,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "u8" => Ok(Dtype::U8),
            "u16" => Ok(Dtype::U16),
            "f32" => Ok(Dtype::F32),
            other => Err(Error::UnknownDtype(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::U8 => "u8",
            Dtype::U16 => "u16",
            Dtype::F32 => "f32",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RasterData {
    U8(Vec<u8>),
    U16(Vec<u16>),
    F32(Vec<f32>),
}

impl RasterData {
    pub fn dtype(&self) -> Dtype {
        match self {
            RasterData::U8(_) => Dtype::U8,
            RasterData::U16(_) => Dtype::U16,
            RasterData::F32(_) => Dtype::F32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            RasterData::U8(v) => v.len(),
            RasterData::U16(v) => v.len(),
            RasterData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        match self {
            RasterData::U8(v) => v[i] as f64,
            RasterData::U16(v) => v[i] as f64,
            RasterData::F32(v) => v[i] as f64,
        }
    }

    fn to_le_bytes(&self) -> Vec<u8> {
        match self {
            RasterData::U8(v) => v.clone(),
            RasterData::U16(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            RasterData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }

    fn from_le_bytes(dtype: Dtype, bytes: &[u8]) -> Self {
        match dtype {
            Dtype::U8 => RasterData::U8(bytes.to_vec()),
            Dtype::U16 => RasterData::U16(
                bytes
                    .chunks_exact(2)
                    .map(|b| u16::from_le_bytes([b[0], b[1]]))
                    .collect(),
            ),
            Dtype::F32 => RasterData::F32(
                bytes
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                    .collect(),
            ),
        }
    }
}

/// A `width x height x bands` image cube, band-sequential.
#[derive(Debug, Clone, PartialEq)]
pub struct MultibandRaster {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub data: RasterData,
}

impl MultibandRaster {
    pub fn new(width: usize, height: usize, bands: usize, data: RasterData) -> Result<Self> {
        let expected = width * height * bands;
        if data.len() != expected {
            return Err(Error::SizeMismatch {
                expected: expected * data.dtype().size(),
                actual: data.len() * data.dtype().size(),
            });
        }
        if bands == 0 {
            return Err(Error::InvalidParameter("raster needs at least one band".into()));
        }
        Ok(Self {
            width,
            height,
            bands,
            data,
        })
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn dtype(&self) -> Dtype {
        self.data.dtype()
    }

    pub fn value(&self, band: usize, row: usize, col: usize) -> f64 {
        self.data.get(band * self.num_pixels() + row * self.width + col)
    }

    /// Feature vector of the pixel at row-major index `idx`.
    pub fn pixel(&self, idx: usize) -> Vec<f64> {
        let n = self.num_pixels();
        (0..self.bands).map(|b| self.data.get(b * n + idx)).collect()
    }
}

/// Per-pixel reference labels; 0 means unlabeled.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<ClassId>,
    pub num_classes: usize,
}

impl GroundTruth {
    pub fn new(width: usize, height: usize, labels: Vec<ClassId>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::SizeMismatch {
                expected: width * height * 2,
                actual: labels.len() * 2,
            });
        }
        let num_classes = labels.iter().copied().max().unwrap_or(0) as usize;
        Ok(Self {
            width,
            height,
            labels,
            num_classes,
        })
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            if l > 0 {
                counts[l as usize - 1] += 1;
            }
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Descriptor {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub dtype: String,
    pub layout: String,
    pub endianness: String,
    pub data: String,
}

fn payload_path(descriptor: &Path) -> PathBuf {
    descriptor.with_extension("bin")
}

pub fn save_raster(raster: &MultibandRaster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let payload = payload_path(path);
    let desc = Descriptor {
        width: raster.width,
        height: raster.height,
        bands: raster.bands,
        dtype: raster.dtype().name().to_string(),
        layout: LAYOUT.to_string(),
        endianness: ENDIANNESS.to_string(),
        data: payload
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let text = serde_json::to_string_pretty(&desc).map_err(|e| Error::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))?;
    fs::write(&payload, raster.data.to_le_bytes()).map_err(|e| Error::io(&payload, e))
}

pub fn load_raster(path: impl AsRef<Path>) -> Result<MultibandRaster> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let desc: Descriptor = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    let dtype = Dtype::parse(&desc.dtype)?;
    if desc.layout != LAYOUT {
        return Err(Error::Format(format!("layout `{}`", desc.layout)));
    }
    if desc.endianness != ENDIANNESS {
        return Err(Error::Format(format!("endianness `{}`", desc.endianness)));
    }
    let payload = path.parent().unwrap_or(Path::new(".")).join(&desc.data);
    let bytes = fs::read(&payload).map_err(|e| Error::io(&payload, e))?;
    let expected = desc.width * desc.height * desc.bands * dtype.size();
    if bytes.len() != expected {
        return Err(Error::SizeMismatch {
            expected,
            actual: bytes.len(),
        });
    }
    MultibandRaster::new(
        desc.width,
        desc.height,
        desc.bands,
        RasterData::from_le_bytes(dtype, &bytes),
    )
}

/// Write a one-band `u16` label raster.
pub fn save_labels(width: usize, height: usize, labels: &[ClassId], path: impl AsRef<Path>) -> Result<()> {
    let raster = MultibandRaster::new(width, height, 1, RasterData::U16(labels.to_vec()))?;
    save_raster(&raster, path)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<ClassId>)> {
    let r = load_raster(path)?;
    if r.bands != 1 {
        return Err(Error::Format(format!("label raster has {} bands", r.bands)));
    }
    match r.data {
        RasterData::U16(v) => Ok((r.width, r.height, v)),
        other => Err(Error::Format(format!(
            "label raster must be u16, got {}",
            other.dtype().name()
        ))),
    }
}

pub fn save_ground_truth(gt: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    save_labels(gt.width, gt.height, &gt.labels, path)
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let (w, h, labels) = load_labels(path)?;
    GroundTruth::new(w, h, labels)
}

/// Draw `per_class` labeled pixels of every class without replacement.
pub fn sample_training_set(
    img: &MultibandRaster,
    gt: &GroundTruth,
    per_class: usize,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    if img.width != gt.width || img.height != gt.height {
        return Err(Error::DimensionMismatch {
            expected: img.num_pixels(),
            actual: gt.labels.len(),
        });
    }
    if per_class == 0 {
        return Err(Error::InvalidParameter("per_class must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_class * gt.num_classes);
    for class in 1..=gt.num_classes as ClassId {
        let pool: Vec<usize> = gt
            .labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == class).then_some(i))
            .collect();
        if pool.len() < per_class {
            return Err(Error::InsufficientSamples {
                class,
                available: pool.len(),
                requested: per_class,
            });
        }
        let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, pool.len(), per_class)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        picked.sort_unstable();
        out.extend(
            picked
                .into_iter()
                .map(|i| LabeledSample::new(img.pixel(i), class)),
        );
    }
    Ok(out)
}

/// Training sets as CSV with header `f1,...,fp,label`.
pub fn write_training_csv(data: &[LabeledSample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let p = data.first().map_or(0, |s| s.features.len());
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = (1..=p).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(csv_err)?;
    for s in data {
        let mut row: Vec<String> = s.features.iter().map(|v| v.to_string()).collect();
        row.push(s.label.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_training_csv(path: impl AsRef<Path>) -> Result<Vec<LabeledSample>> {
    let path = path.as_ref();
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().next_back() != Some("label") {
        return Err(Error::Format(format!(
            "{}: last CSV column must be `label`",
            path.display()
        )));
    }
    let p = headers.len() - 1;
    let bad = |row: usize, what: &str| {
        Error::Format(format!("{}: row {row}: {what}", path.display()))
    };
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let features = rec
            .iter()
            .take(p)
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad(i + 1, "invalid feature value"))?;
        let label = rec[p]
            .trim()
            .parse::<ClassId>()
            .map_err(|_| bad(i + 1, "invalid label"))?;
        out.push(LabeledSample::new(features, label));
    }
    Ok(out)
}

/// Parameters of a synthetic scene: Voronoi regions of classes, each pixel
/// drawn from its class's independent per-band Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub num_classes: usize,
    /// `means[k][b]` for class `k + 1` and band `b`.
    pub means: Vec<Vec<f64>>,
    pub stds: Vec<Vec<f64>>,
    /// Number of Voronoi seed sites.
    pub sites: usize,
    #[serde(default = "default_dtype")]
    pub dtype: Dtype,
    /// Multiplies every standard deviation.
    #[serde(default = "one")]
    pub noise_scale: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_dtype() -> Dtype {
    Dtype::U8
}

fn one() -> f64 {
    1.0
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidParameter(m));
        if self.num_classes < 2 {
            return invalid(format!("scene needs at least 2 classes, got {}", self.num_classes));
        }
        if self.width == 0 || self.height == 0 || self.bands == 0 {
            return invalid("scene dimensions must be positive".into());
        }
        if self.sites < self.num_classes {
            return invalid(format!(
                "{} classes need at least as many sites, got {}",
                self.num_classes, self.sites
            ));
        }
        if self.dtype == Dtype::U16 {
            return invalid("scene dtype must be u8 or f32".into());
        }
        for table in [&self.means, &self.stds] {
            if table.len() != self.num_classes || table.iter().any(|r| r.len() != self.bands) {
                return invalid("means and stds must be num_classes x bands".into());
            }
        }
        if self.stds.iter().flatten().any(|s| !(*s > 0.0)) || !(self.noise_scale > 0.0) {
            return invalid("standard deviations must be positive".into());
        }
        Ok(())
    }
}

pub fn generate_scene(spec: &SceneSpec) -> Result<(MultibandRaster, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let (w, h) = (spec.width, spec.height);
    let ux = Uniform::new(0.0, w as f64).expect("positive width");
    let uy = Uniform::new(0.0, h as f64).expect("positive height");
    let uc = Uniform::new_inclusive(1, spec.num_classes as ClassId).expect("classes");
    let sites: Vec<(f64, f64, ClassId)> = (0..spec.sites)
        .map(|i| {
            let (x, y) = (ux.sample(&mut rng), uy.sample(&mut rng));
            let class = if i < spec.num_classes {
                i as ClassId + 1
            } else {
                uc.sample(&mut rng)
            };
            (x, y, class)
        })
        .collect();

    let mut labels = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            let (px, py) = (col as f64 + 0.5, row as f64 + 0.5);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (i, (sx, sy, _)) in sites.iter().enumerate() {
                let d = (px - sx).powi(2) + (py - sy).powi(2);
                if d < best_d {
                    best = i;
                    best_d = d;
                }
            }
            labels.push(sites[best].2);
        }
    }

    let normals: Vec<Vec<Normal<f64>>> = spec
        .means
        .iter()
        .zip(&spec.stds)
        .map(|(m, s)| {
            m.iter()
                .zip(s)
                .map(|(&mu, &sd)| Normal::new(mu, sd * spec.noise_scale).expect("positive std"))
                .collect()
        })
        .collect();
    let n = w * h;
    let mut values = vec![0.0f64; n * spec.bands];
    for (i, &l) in labels.iter().enumerate() {
        for (b, dist) in normals[l as usize - 1].iter().enumerate() {
            values[b * n + i] = dist.sample(&mut rng);
        }
    }
    let data = match spec.dtype {
        Dtype::U8 => RasterData::U8(values.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect()),
        _ => RasterData::F32(values.iter().map(|&v| v as f32).collect()),
    };
    let raster = MultibandRaster::new(w, h, spec.bands, data)?;
    let mut gt = GroundTruth::new(w, h, labels)?;
    gt.num_classes = spec.num_classes;
    Ok((raster, gt))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec(seed: u64) -> SceneSpec {
        SceneSpec {
            width: 20,
            height: 15,
            bands: 2,
            num_classes: 3,
            means: vec![vec![30.0, 200.0], vec![120.0, 120.0], vec![220.0, 40.0]],
            stds: vec![vec![5.0; 2]; 3],
            sites: 6,
            dtype: Dtype::U8,
            noise_scale: 1.0,
            rng_seed: seed,
        }
    }

    #[test]
    fn f32_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let vals: Vec<f32> = (0..24).map(|i| (i as f32).sin() * 1e3 + f32::EPSILON).collect();
        let r = MultibandRaster::new(4, 3, 2, RasterData::F32(vals)).unwrap();
        let path = dir.path().join("r.json");
        save_raster(&r, &path).unwrap();
        let back = load_raster(&path).unwrap();
        assert_eq!(r, back);
        let bytes = fs::read(dir.path().join("r.bin")).unwrap();
        save_raster(&back, dir.path().join("s.json")).unwrap();
        assert_eq!(bytes, fs::read(dir.path().join("s.bin")).unwrap());
    }

    #[test]
    fn u8_values_preserved() {
        let dir = tempfile::tempdir().unwrap();
        let r = MultibandRaster::new(16, 16, 1, RasterData::U8((0..=255).collect())).unwrap();
        let path = dir.path().join("u.json");
        save_raster(&r, &path).unwrap();
        assert_eq!(load_raster(&path).unwrap(), r);
    }

    #[test]
    fn short_payload_is_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        let desc = Descriptor {
            width: 10,
            height: 10,
            bands: 1,
            dtype: "u8".into(),
            layout: LAYOUT.into(),
            endianness: ENDIANNESS.into(),
            data: "bad.bin".into(),
        };
        fs::write(&path, serde_json::to_string(&desc).unwrap()).unwrap();
        fs::write(dir.path().join("bad.bin"), vec![0u8; 50]).unwrap();
        assert!(matches!(
            load_raster(&path),
            Err(Error::SizeMismatch { expected: 100, actual: 50 })
        ));
        let desc = Descriptor {
            dtype: "f64".into(),
            ..desc
        };
        fs::write(&path, serde_json::to_string(&desc).unwrap()).unwrap();
        assert!(matches!(load_raster(&path), Err(Error::UnknownDtype(_))));
        assert!(load_raster(dir.path().join("missing.json")).is_err());
    }

    #[test]
    fn scene_is_deterministic_and_complete() {
        let (a, ga) = generate_scene(&tiny_spec(4)).unwrap();
        let (b, gb) = generate_scene(&tiny_spec(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
        assert!(ga.labels.iter().all(|&l| (1..=3).contains(&l)));
        assert!(ga.class_counts().iter().all(|&n| n > 0));
        let (c, _) = generate_scene(&tiny_spec(5)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn too_few_sites_is_error() {
        let spec = SceneSpec {
            sites: 2,
            ..tiny_spec(0)
        };
        assert!(generate_scene(&spec).is_err());
    }

    #[test]
    fn sampling_is_stratified_and_deterministic() {
        let (img, gt) = generate_scene(&tiny_spec(8)).unwrap();
        let min = *gt.class_counts().iter().min().unwrap();
        let s1 = sample_training_set(&img, &gt, min, 3).unwrap();
        assert_eq!(s1, sample_training_set(&img, &gt, min, 3).unwrap());
        for class in 1..=3 {
            assert_eq!(s1.iter().filter(|s| s.label == class).count(), min);
        }
        // the full labeled set of the smallest class
        let smallest = gt.class_counts().iter().position(|&n| n == min).unwrap() as ClassId + 1;
        let expected: Vec<Vec<f64>> = gt
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == smallest)
            .map(|(i, _)| img.pixel(i))
            .collect();
        let got: Vec<Vec<f64>> = s1
            .iter()
            .filter(|s| s.label == smallest)
            .map(|s| s.features.clone())
            .collect();
        assert_eq!(got, expected);
        assert!(matches!(
            sample_training_set(&img, &gt, min + 1, 3),
            Err(Error::InsufficientSamples { class, .. }) if class == smallest
        ));
    }

    #[test]
    fn unlabeled_pixels_never_sampled() {
        let img = MultibandRaster::new(3, 1, 1, RasterData::U8(vec![10, 20, 30])).unwrap();
        let gt = GroundTruth::new(3, 1, vec![1, 0, 2]).unwrap();
        let s = sample_training_set(&img, &gt, 1, 0).unwrap();
        assert_eq!(
            s,
            vec![LabeledSample::new(vec![10.0], 1), LabeledSample::new(vec![30.0], 2)]
        );
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let data = vec![
            LabeledSample::new(vec![1.0, 0.1 + 0.2, 255.0], 1),
            LabeledSample::new(vec![-3.5, 1e-300, 7.0], 4),
        ];
        write_training_csv(&data, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("f1,f2,f3,label\n"));
        assert_eq!(read_training_csv(&path).unwrap(), data);
    }
}

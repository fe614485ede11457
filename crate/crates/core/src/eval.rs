//! Confusion matrices, run configuration and the end-to-end experiment
//! pipeline: sample, induce, tune, classify both ways, evaluate.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::contextual::{classify_image, ClassifyMode, ClassifyOptions, ClassifyStats, LabelMap};
use crate::error::{Error, Result};
use crate::evidence::BpaMode;
use crate::fuzzy::{ClassId, Rulebase, DEFAULT_CONFIDENCE_THRESHOLD, DEFAULT_Q};
use crate::induction::{induce_rulebase, InductionConfig};
use crate::raster::{
    generate_scene, load_ground_truth, load_raster, sample_training_set, save_ground_truth,
    save_labels, save_raster, write_training_csv, GroundTruth, MultibandRaster, SceneSpec,
};
use crate::tuning::{tune, TuningConfig, TuningReport};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
    /// Evaluated pixels predicted as 0 (no decision); always errors.
    pub undecided: usize,
    pub include_borders: bool,
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum::<usize>() + self.undecided
    }

    pub fn correct(&self) -> usize {
        (0..self.num_classes()).map(|k| self.counts[k][k]).sum()
    }

    pub fn error_rate(&self) -> f64 {
        1.0 - self.correct() as f64 / self.total() as f64
    }

    /// Per true class; `None` for classes absent from the evaluated pixels.
    pub fn per_class_error_rates(&self) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let n: usize = row.iter().sum();
                (n > 0).then(|| 1.0 - row[k] as f64 / n as f64)
            })
            .collect()
    }

    pub fn report(&self) -> EvaluationReport {
        EvaluationReport {
            num_classes: self.num_classes(),
            include_borders: self.include_borders,
            evaluated_pixels: self.total(),
            undecided: self.undecided,
            error_rate: self.error_rate(),
            per_class_error_rate: self.per_class_error_rates(),
            counts: self.counts.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub num_classes: usize,
    pub include_borders: bool,
    pub evaluated_pixels: usize,
    pub undecided: usize,
    pub error_rate: f64,
    pub per_class_error_rate: Vec<Option<f64>>,
    pub counts: Vec<Vec<usize>>,
}

/// Compare predictions with ground truth over every labeled pixel, optionally
/// skipping the one-pixel image border.
pub fn confusion_matrix(
    pred: &LabelMap,
    gt: &GroundTruth,
    include_borders: bool,
) -> Result<ConfusionMatrix> {
    if pred.width != gt.width || pred.height != gt.height {
        return Err(Error::DimensionMismatch {
            expected: gt.labels.len(),
            actual: pred.labels.len(),
        });
    }
    let c = pred
        .labels
        .iter()
        .copied()
        .max()
        .unwrap_or(0)
        .max(gt.num_classes as ClassId) as usize;
    let mut counts = vec![vec![0usize; c]; c];
    let mut undecided = 0;
    let (w, h) = (gt.width, gt.height);
    for (i, (&t, &p)) in gt.labels.iter().zip(&pred.labels).enumerate() {
        if t == 0 {
            continue;
        }
        let (row, col) = (i / w, i % w);
        if !include_borders && (row == 0 || col == 0 || row + 1 == h || col + 1 == w) {
            continue;
        }
        if p == 0 {
            undecided += 1;
        } else {
            counts[t as usize - 1][p as usize - 1] += 1;
        }
    }
    let m = ConfusionMatrix {
        counts,
        undecided,
        include_borders,
    };
    if m.total() == 0 {
        return Err(Error::EmptyEvaluation);
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Synthesize the image from this scene description...
    pub scene: Option<SceneSpec>,
    /// ...or read it from these rasters (relative to the config file).
    pub image: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub per_class: usize,
    /// One training set, rulebase and evaluation per seed.
    pub training_seeds: Vec<u64>,
    pub q: f64,
    pub confidence_threshold: f64,
    pub bpa_mode: BpaMode,
    pub induction: InductionConfig,
    pub tuning: TuningConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scene: None,
            image: None,
            ground_truth: None,
            per_class: 800,
            training_seeds: vec![1, 2, 3, 4],
            q: DEFAULT_Q,
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            bpa_mode: BpaMode::Frame,
            induction: InductionConfig::default(),
            tuning: TuningConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.image, &mut cfg.ground_truth].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scene.is_some() == (self.image.is_some() || self.ground_truth.is_some()) {
            return Err(Error::InvalidParameter(
                "config needs either `scene` or both `image` and `ground_truth`".into(),
            ));
        }
        if self.scene.is_none() && (self.image.is_none() || self.ground_truth.is_none()) {
            return Err(Error::InvalidParameter(
                "`image` and `ground_truth` must be given together".into(),
            ));
        }
        if self.training_seeds.is_empty() {
            return Err(Error::InvalidParameter("no training seeds".into()));
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(Error::InvalidParameter(format!(
                "confidence threshold must lie in [0, 1], got {}",
                self.confidence_threshold
            )));
        }
        self.tuning.validate()
    }

    pub fn load_data(&self) -> Result<(MultibandRaster, GroundTruth)> {
        match (&self.scene, &self.image, &self.ground_truth) {
            (Some(spec), _, _) => generate_scene(spec),
            (None, Some(img), Some(gt)) => Ok((load_raster(img)?, load_ground_truth(gt)?)),
            _ => Err(Error::InvalidParameter("no image source configured".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeReport {
    pub error_rate: f64,
    pub error_rate_interior: f64,
    pub evaluated_pixels: usize,
    pub stats: ClassifyStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub num_rules: usize,
    pub k_w: f64,
    pub training_samples: usize,
    pub tuning: TuningReport,
    pub direct: ModeReport,
    pub evidential: ModeReport,
    /// Direct minus evidential whole-image error rate.
    pub improvement: f64,
    pub improvement_interior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub num_classes: usize,
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub bpa_mode: BpaMode,
    pub runs: Vec<RunReport>,
    pub mean_direct_error: f64,
    pub mean_evidential_error: f64,
    pub non_inferior_runs: usize,
    pub improved_runs: usize,
}

/// Everything produced for one training seed.
pub struct RunArtifacts {
    pub report: RunReport,
    pub rulebase: Rulebase,
    pub direct: LabelMap,
    pub evidential: LabelMap,
}

pub fn evaluate_mode(
    rb: &Rulebase,
    img: &MultibandRaster,
    gt: &GroundTruth,
    opts: &ClassifyOptions,
) -> Result<(LabelMap, ModeReport)> {
    let (map, stats) = classify_image(rb, img, opts)?;
    let all = confusion_matrix(&map, gt, true)?;
    let interior = confusion_matrix(&map, gt, false)?;
    let report = ModeReport {
        error_rate: all.error_rate(),
        error_rate_interior: interior.error_rate(),
        evaluated_pixels: all.total(),
        stats,
    };
    Ok((map, report))
}

/// Sample, induce, tune and evaluate both modes for one training seed.
pub fn run_once(
    cfg: &RunConfig,
    img: &MultibandRaster,
    gt: &GroundTruth,
    seed: u64,
) -> Result<(RunArtifacts, Vec<crate::induction::LabeledSample>, Rulebase)> {
    let train = sample_training_set(img, gt, cfg.per_class, seed)?;
    let induction = InductionConfig {
        rng_seed: cfg.induction.rng_seed.wrapping_add(seed),
        ..cfg.induction.clone()
    };
    let mut initial = induce_rulebase(&train, &induction, cfg.q)?;
    initial.provenance = provenance(cfg, seed, &induction, None);
    let (mut tuned, tuning) = tune(&initial, &train, &cfg.tuning)?;
    tuned.provenance = provenance(cfg, seed, &induction, Some(&tuning));

    let base = ClassifyOptions {
        mode: ClassifyMode::Direct,
        bpa_mode: cfg.bpa_mode,
        threshold: cfg.confidence_threshold,
    };
    let (direct, direct_report) = evaluate_mode(&tuned, img, gt, &base)?;
    let (evidential, evidential_report) = evaluate_mode(
        &tuned,
        img,
        gt,
        &ClassifyOptions {
            mode: ClassifyMode::Evidential,
            ..base
        },
    )?;
    let report = RunReport {
        seed,
        num_rules: tuned.num_rules(),
        k_w: tuned.k_w,
        training_samples: train.len(),
        improvement: direct_report.error_rate - evidential_report.error_rate,
        improvement_interior: direct_report.error_rate_interior
            - evidential_report.error_rate_interior,
        tuning,
        direct: direct_report,
        evidential: evidential_report,
    };
    Ok((
        RunArtifacts {
            report,
            rulebase: tuned,
            direct,
            evidential,
        },
        train,
        initial,
    ))
}

fn provenance(
    cfg: &RunConfig,
    seed: u64,
    induction: &InductionConfig,
    tuning: Option<&TuningReport>,
) -> serde_json::Map<String, serde_json::Value> {
    let mut p = serde_json::Map::new();
    p.insert("sample_seed".into(), seed.into());
    p.insert("per_class".into(), cfg.per_class.into());
    p.insert(
        "induction".into(),
        serde_json::to_value(induction).expect("config serializes"),
    );
    if let Some(t) = tuning {
        p.insert(
            "tuning".into(),
            serde_json::to_value(&cfg.tuning).expect("config serializes"),
        );
        p.insert("learning_rate".into(), t.learning_rate.into());
        p.insert("epochs_run".into(), t.epochs_run.into());
    }
    p
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_rulebase(path: impl AsRef<Path>) -> Result<Rulebase> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Run every training seed and write all artifacts under `out_dir`:
/// `scene/` (when synthesized), `run_<seed>/` and `report.json`.
pub fn run_pipeline(cfg: &RunConfig, out_dir: impl AsRef<Path>) -> Result<PipelineReport> {
    cfg.validate()?;
    let out = out_dir.as_ref();
    let mkdir = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::io(p, e));
    mkdir(out)?;
    let (img, gt) = cfg.load_data()?;
    if cfg.scene.is_some() {
        let scene_dir = out.join("scene");
        mkdir(&scene_dir)?;
        save_raster(&img, scene_dir.join("image.json"))?;
        save_ground_truth(&gt, scene_dir.join("truth.json"))?;
    }

    let mut runs = Vec::new();
    for &seed in &cfg.training_seeds {
        let (art, train, initial) = run_once(cfg, &img, &gt, seed)?;
        let dir = out.join(format!("run_{seed}"));
        mkdir(&dir)?;
        write_training_csv(&train, dir.join("train.csv"))?;
        write_json(&initial, dir.join("rules_initial.json"))?;
        write_json(&art.rulebase, dir.join("rules.json"))?;
        save_labels(art.direct.width, art.direct.height, &art.direct.labels, dir.join("direct.json"))?;
        save_labels(
            art.evidential.width,
            art.evidential.height,
            &art.evidential.labels,
            dir.join("evidential.json"),
        )?;
        write_json(&art.report, dir.join("report.json"))?;
        runs.push(art.report);
    }

    let n = runs.len() as f64;
    let report = PipelineReport {
        num_classes: gt.num_classes,
        width: img.width,
        height: img.height,
        bands: img.bands,
        bpa_mode: cfg.bpa_mode,
        mean_direct_error: runs.iter().map(|r| r.direct.error_rate).sum::<f64>() / n,
        mean_evidential_error: runs.iter().map(|r| r.evidential.error_rate).sum::<f64>() / n,
        non_inferior_runs: runs.iter().filter(|r| r.improvement >= 0.0).count(),
        improved_runs: runs.iter().filter(|r| r.improvement > 0.0).count(),
        runs,
    };
    write_json(&report, out.join("report.json"))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(labels: Vec<ClassId>, w: usize) -> LabelMap {
        LabelMap {
            width: w,
            height: labels.len() / w,
            labels,
        }
    }

    #[test]
    fn perfect_and_fully_wrong() {
        let gt = GroundTruth::new(3, 2, vec![1, 2, 2, 1, 1, 2]).unwrap();
        let m = confusion_matrix(&map(gt.labels.clone(), 3), &gt, true).unwrap();
        assert_eq!(m.error_rate(), 0.0);
        assert_eq!(m.counts, vec![vec![3, 0], vec![0, 3]]);

        let flipped: Vec<ClassId> = gt.labels.iter().map(|&l| 3 - l).collect();
        let m = confusion_matrix(&map(flipped, 3), &gt, true).unwrap();
        assert_eq!(m.error_rate(), 1.0);
        assert_eq!(m.per_class_error_rates(), vec![Some(1.0), Some(1.0)]);
    }

    #[test]
    fn unlabeled_and_borders_skipped() {
        let gt = GroundTruth::new(3, 3, vec![0, 1, 1, 1, 2, 1, 1, 1, 0]).unwrap();
        let pred = map(vec![2, 2, 2, 2, 2, 2, 2, 2, 2], 3);
        let all = confusion_matrix(&pred, &gt, true).unwrap();
        assert_eq!(all.total(), 7);
        let interior = confusion_matrix(&pred, &gt, false).unwrap();
        assert_eq!(interior.total(), 1);
        assert_eq!(interior.error_rate(), 0.0);
    }

    #[test]
    fn empty_and_mismatched() {
        let gt = GroundTruth::new(2, 1, vec![0, 0]).unwrap();
        assert!(matches!(
            confusion_matrix(&map(vec![1, 1], 2), &gt, true),
            Err(Error::EmptyEvaluation)
        ));
        let gt = GroundTruth::new(2, 1, vec![1, 1]).unwrap();
        assert!(confusion_matrix(&map(vec![1, 1, 1], 3), &gt, true).is_err());
    }

    #[test]
    fn config_needs_one_source() {
        let cfg = RunConfig::default();
        assert!(cfg.validate().is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"image": "a.json"}"#).unwrap();
        assert!(cfg.validate().is_err());
        let cfg: RunConfig =
            serde_json::from_str(r#"{"image": "a.json", "ground_truth": "b.json", "per_class": 5}"#)
                .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.per_class, 5);
        assert_eq!(cfg.training_seeds, vec![1, 2, 3, 4]);
    }
}

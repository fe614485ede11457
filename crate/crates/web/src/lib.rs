//! Browser bindings: a scene demo comparing both classifier modes, a BPA
//! explorer and a soft-match curve. The logic lives in plain functions so
//! it can be tested natively; the `#[wasm_bindgen]` items only convert.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use fuzzy_evidence::contextual::{classify_image, ClassifyMode, ClassifyOptions};
use fuzzy_evidence::eval::{confusion_matrix, RunConfig};
use fuzzy_evidence::evidence::{bpa_from_confidences, pignistic, BpaMode};
use fuzzy_evidence::fuzzy::{soft_match, ConfidenceVector, DEFAULT_CONFIDENCE_THRESHOLD};
use fuzzy_evidence::induction::induce_rulebase;
use fuzzy_evidence::raster::{generate_scene, sample_training_set};
use fuzzy_evidence::tuning::{tune, TuningConfig};
use fuzzy_evidence::{ClassId, Error, Result};

const SCENE: &str = include_str!("../../core/data/acceptance.json");

/// RGB per class id; index 0 (undecided) is black.
const PALETTE: [[u8; 3]; 9] = [
    [0, 0, 0],
    [38, 70, 83],
    [42, 157, 143],
    [233, 196, 106],
    [231, 111, 81],
    [142, 202, 230],
    [106, 76, 147],
    [255, 202, 212],
    [120, 120, 120],
];

pub fn label_rgba(labels: &[ClassId]) -> Vec<u8> {
    labels
        .iter()
        .flat_map(|&l| {
            let [r, g, b] = PALETTE[(l as usize).min(PALETTE.len() - 1)];
            [r, g, b, 255]
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct DemoParams {
    pub size: usize,
    pub noise_scale: f64,
    pub per_class: usize,
    pub k_w: f64,
    pub bpa_mode: BpaMode,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoSummary {
    pub width: usize,
    pub height: usize,
    pub num_rules: usize,
    pub tuning_epochs: usize,
    pub training_error_before: f64,
    pub training_error_after: f64,
    pub direct_error: f64,
    pub evidential_error: f64,
    pub border_pixels: usize,
    pub conflict_fallbacks: usize,
    pub degenerate_fallbacks: usize,
}

#[derive(Debug, Clone)]
pub struct DemoOutput {
    pub truth: Vec<ClassId>,
    pub direct: Vec<ClassId>,
    pub evidential: Vec<ClassId>,
    pub summary: DemoSummary,
}

/// Synthesize a scene with the acceptance class models, train on it and
/// classify it both ways.
pub fn run_demo(p: &DemoParams) -> Result<DemoOutput> {
    let cfg: RunConfig = serde_json::from_str(SCENE).map_err(|e| Error::Format(e.to_string()))?;
    let mut spec = cfg.scene.expect("bundled config has a scene");
    spec.width = p.size;
    spec.height = p.size;
    spec.noise_scale = p.noise_scale;
    spec.rng_seed = p.seed;
    let (img, gt) = generate_scene(&spec)?;

    let train = sample_training_set(&img, &gt, p.per_class, p.seed)?;
    let mut induction = cfg.induction.clone();
    induction.k_w = p.k_w;
    induction.rng_seed = p.seed;
    let initial = induce_rulebase(&train, &induction, cfg.q)?;
    let tuning = TuningConfig {
        max_epochs: 100,
        ..TuningConfig::default()
    };
    let (rb, report) = tune(&initial, &train, &tuning)?;

    let opts = ClassifyOptions {
        mode: ClassifyMode::Direct,
        bpa_mode: p.bpa_mode,
        threshold: cfg.confidence_threshold,
    };
    let (direct, _) = classify_image(&rb, &img, &opts)?;
    let (evidential, stats) = classify_image(
        &rb,
        &img,
        &ClassifyOptions {
            mode: ClassifyMode::Evidential,
            ..opts
        },
    )?;
    let summary = DemoSummary {
        width: img.width,
        height: img.height,
        num_rules: rb.num_rules(),
        tuning_epochs: report.epochs_run,
        training_error_before: report.training_error_rate_before,
        training_error_after: report.training_error_rate_after,
        direct_error: confusion_matrix(&direct, &gt, true)?.error_rate(),
        evidential_error: confusion_matrix(&evidential, &gt, true)?.error_rate(),
        border_pixels: stats.border_pixels,
        conflict_fallbacks: stats.conflict_fallbacks,
        degenerate_fallbacks: stats.degenerate_fallbacks,
    };
    Ok(DemoOutput {
        truth: gt.labels,
        direct: direct.labels,
        evidential: evidential.labels,
        summary,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PairMass {
    pub classes: [ClassId; 2],
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BpaView {
    pub singletons: Vec<f64>,
    pub pairs: Vec<PairMass>,
    pub frame: f64,
    pub pignistic: Vec<f64>,
    pub decision: ClassId,
}

pub fn explore_bpa(cm0: Vec<f64>, cmi: Vec<f64>, mode: BpaMode, threshold: f64) -> Result<BpaView> {
    let m = bpa_from_confidences(
        &ConfidenceVector::new(cm0, threshold)?,
        &ConfidenceVector::new(cmi, threshold)?,
        mode,
    )?;
    let p = pignistic(&m);
    let frame = m.frame();
    Ok(BpaView {
        singletons: m.singletons().to_vec(),
        pairs: frame
            .pairs()
            .zip(m.pairs())
            .map(|((l, k), &mass)| PairMass {
                classes: [l as ClassId + 1, k as ClassId + 1],
                mass,
            })
            .collect(),
        frame: m.frame_mass(),
        decision: p.decision(),
        pignistic: p.probs,
    })
}

/// Soft-match of `values` at `steps` exponents spaced evenly from `q_from`
/// to `q_to`.
pub fn softmin_curve(values: &[f64], q_from: f64, q_to: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::InvalidParameter("need at least two steps".into()));
    }
    (0..steps)
        .map(|i| {
            let q = q_from + (q_to - q_from) * i as f64 / (steps - 1) as f64;
            soft_match(values, q)
        })
        .collect()
}

fn js(e: Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn parse_mode(mode: &str) -> std::result::Result<BpaMode, JsValue> {
    mode.parse().map_err(js)
}

#[wasm_bindgen]
pub struct Demo {
    out: DemoOutput,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(
        size: usize,
        noise_scale: f64,
        per_class: usize,
        k_w: f64,
        bpa_mode: &str,
        seed: u32,
    ) -> std::result::Result<Demo, JsValue> {
        let params = DemoParams {
            size,
            noise_scale,
            per_class,
            k_w,
            bpa_mode: parse_mode(bpa_mode)?,
            seed: seed as u64,
        };
        run_demo(&params).map(|out| Demo { out }).map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.out.summary.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.out.summary.height
    }

    pub fn truth_rgba(&self) -> Vec<u8> {
        label_rgba(&self.out.truth)
    }

    pub fn direct_rgba(&self) -> Vec<u8> {
        label_rgba(&self.out.direct)
    }

    pub fn evidential_rgba(&self) -> Vec<u8> {
        label_rgba(&self.out.evidential)
    }

    pub fn summary(&self) -> String {
        serde_json::to_string(&self.out.summary).expect("summary serializes")
    }
}

#[wasm_bindgen]
pub fn bpa(cm0: Vec<f64>, cmi: Vec<f64>, mode: &str) -> std::result::Result<String, JsValue> {
    let view = explore_bpa(cm0, cmi, parse_mode(mode)?, DEFAULT_CONFIDENCE_THRESHOLD).map_err(js)?;
    Ok(serde_json::to_string(&view).expect("view serializes"))
}

#[wasm_bindgen]
pub fn softmin(values: Vec<f64>, q_from: f64, q_to: f64, steps: usize) -> std::result::Result<Vec<f64>, JsValue> {
    softmin_curve(&values, q_from, q_to, steps).map_err(js)
}

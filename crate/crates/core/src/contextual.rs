//! Whole-image classification, directly or with 3x3 evidential fusion.
//!
//! In evidential mode every pixel's confidence vector is computed once. For
//! an interior pixel, each of its eight neighbors forms one body of evidence
//! together with the pixel itself; the eight BPAs are combined with
//! Dempster's rule and the class of highest pignistic probability wins.
//! Border pixels and pixels whose evidence cannot be combined fall back to
//! the direct decision.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{bpa_from_confidences, combine_all, pignistic, BpaMode};
use crate::fuzzy::{ClassId, ConfidenceVector, Rulebase, DEFAULT_CONFIDENCE_THRESHOLD};
use crate::raster::{GroundTruth, MultibandRaster};

/// Neighbor offsets `(drow, dcol)` in the fixed order used for folding.
pub const NEIGHBOR_OFFSETS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodWindow {
    pub center: (usize, usize),
    /// In-image neighbors as `(row, col)`, in [`NEIGHBOR_OFFSETS`] order.
    pub neighbors: Vec<(usize, usize)>,
}

impl NeighborhoodWindow {
    pub fn new(row: usize, col: usize, width: usize, height: usize) -> Self {
        let neighbors = NEIGHBOR_OFFSETS
            .iter()
            .filter_map(|&(dr, dc)| {
                let r = row.checked_add_signed(dr)?;
                let c = col.checked_add_signed(dc)?;
                (r < height && c < width).then_some((r, c))
            })
            .collect();
        Self {
            center: (row, col),
            neighbors,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.neighbors.len() == 8
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<ClassId>,
}

impl LabelMap {
    pub fn get(&self, row: usize, col: usize) -> ClassId {
        self.labels[row * self.width + col]
    }

    pub fn into_ground_truth(self) -> Result<GroundTruth> {
        GroundTruth::new(self.width, self.height, self.labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifyMode {
    Direct,
    #[default]
    Evidential,
}

impl std::str::FromStr for ClassifyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(ClassifyMode::Direct),
            "evidential" => Ok(ClassifyMode::Evidential),
            other => Err(Error::InvalidParameter(format!("unknown classifier mode `{other}`"))),
        }
    }
}

/// What the rulebase says about one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelScore {
    pub confidence: ConfidenceVector,
    /// Class of the single best-firing rule.
    pub direct: ClassId,
}

/// Source of per-pixel scores. [`Rulebase`] is the production scorer; tests
/// substitute counting doubles.
pub trait PixelScorer: Sync {
    fn num_features(&self) -> usize;
    fn num_classes(&self) -> usize;
    fn score(&self, x: &[f64]) -> PixelScore;
}

pub struct RulebaseScorer<'a> {
    pub rulebase: &'a Rulebase,
    pub threshold: f64,
}

impl PixelScorer for RulebaseScorer<'_> {
    fn num_features(&self) -> usize {
        self.rulebase.num_features
    }

    fn num_classes(&self) -> usize {
        self.rulebase.num_classes
    }

    fn score(&self, x: &[f64]) -> PixelScore {
        let rb = self.rulebase;
        let logs: Vec<f64> = rb.rules.iter().map(|r| r.log_firing(x, rb.q)).collect();
        let confidence = ConfidenceVector::new(rb.class_maxima(&logs), self.threshold)
            .expect("firing strengths lie in [0, 1]");
        PixelScore {
            confidence,
            direct: rb.decide(&logs).class,
        }
    }
}

#[cfg(feature = "parallel")]
fn map_indices<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indices<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Scores of every pixel, computed once and shared by all decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceGrid {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<PixelScore>,
}

impl ConfidenceGrid {
    pub fn compute(scorer: &impl PixelScorer, img: &MultibandRaster) -> Result<Self> {
        if img.bands != scorer.num_features() {
            return Err(Error::DimensionMismatch {
                expected: scorer.num_features(),
                actual: img.bands,
            });
        }
        let cells = map_indices(img.num_pixels(), |i| scorer.score(&img.pixel(i)));
        Ok(Self {
            width: img.width,
            height: img.height,
            cells,
        })
    }

    pub fn at(&self, row: usize, col: usize) -> &PixelScore {
        &self.cells[row * self.width + col]
    }
}

/// Pignistic decision for an interior pixel from its own and its eight
/// neighbors' confidences.
pub fn classify_pixel_evidential(
    grid: &ConfidenceGrid,
    row: usize,
    col: usize,
    mode: BpaMode,
) -> Result<ClassId> {
    let window = NeighborhoodWindow::new(row, col, grid.width, grid.height);
    if !window.is_complete() {
        return Err(Error::InvalidParameter(format!(
            "pixel ({row}, {col}) has an incomplete neighborhood"
        )));
    }
    let center = &grid.at(row, col).confidence;
    let masses = window
        .neighbors
        .iter()
        .map(|&(r, c)| bpa_from_confidences(center, &grid.at(r, c).confidence, mode))
        .collect::<Result<Vec<_>>>()?;
    let combined = combine_all(&masses)?;
    Ok(pignistic(&combined).decision())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub mode: ClassifyMode,
    pub bpa_mode: BpaMode,
    pub threshold: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            mode: ClassifyMode::Evidential,
            bpa_mode: BpaMode::Frame,
            threshold: DEFAULT_CONFIDENCE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyStats {
    pub class_counts: Vec<usize>,
    /// Pixels decided directly because their neighborhood is incomplete.
    pub border_pixels: usize,
    /// Interior pixels decided directly after total conflict in the fold.
    pub conflict_fallbacks: usize,
    /// Interior pixels decided directly because a BPA could not be formed.
    pub degenerate_fallbacks: usize,
    #[serde(skip)]
    pub runtime: Duration,
}

enum Outcome {
    Fused(ClassId),
    Border(ClassId),
    Conflict(ClassId),
    Degenerate(ClassId),
}

pub fn classify_image(
    rb: &Rulebase,
    img: &MultibandRaster,
    opts: &ClassifyOptions,
) -> Result<(LabelMap, ClassifyStats)> {
    let scorer = RulebaseScorer {
        rulebase: rb,
        threshold: opts.threshold,
    };
    classify_image_with(&scorer, img, opts)
}

pub fn classify_image_with(
    scorer: &impl PixelScorer,
    img: &MultibandRaster,
    opts: &ClassifyOptions,
) -> Result<(LabelMap, ClassifyStats)> {
    // The clock is unavailable on bare wasm32.
    let start = (!cfg!(target_arch = "wasm32")).then(std::time::Instant::now);
    let grid = ConfidenceGrid::compute(scorer, img)?;
    let (w, h) = (grid.width, grid.height);

    let outcomes: Vec<Outcome> = match opts.mode {
        ClassifyMode::Direct => grid.cells.iter().map(|c| Outcome::Fused(c.direct)).collect(),
        ClassifyMode::Evidential => map_indices(w * h, |i| {
            let (row, col) = (i / w, i % w);
            let direct = grid.cells[i].direct;
            if row == 0 || col == 0 || row + 1 == h || col + 1 == w {
                return Outcome::Border(direct);
            }
            match classify_pixel_evidential(&grid, row, col, opts.bpa_mode) {
                Ok(class) => Outcome::Fused(class),
                Err(Error::TotalConflictAt { .. } | Error::TotalConflict { .. }) => {
                    Outcome::Conflict(direct)
                }
                Err(_) => Outcome::Degenerate(direct),
            }
        }),
    };

    let mut stats = ClassifyStats {
        class_counts: vec![0; scorer.num_classes()],
        border_pixels: 0,
        conflict_fallbacks: 0,
        degenerate_fallbacks: 0,
        runtime: Duration::ZERO,
    };
    let labels: Vec<ClassId> = outcomes
        .into_iter()
        .map(|o| match o {
            Outcome::Fused(c) => c,
            Outcome::Border(c) => {
                stats.border_pixels += 1;
                c
            }
            Outcome::Conflict(c) => {
                stats.conflict_fallbacks += 1;
                c
            }
            Outcome::Degenerate(c) => {
                stats.degenerate_fallbacks += 1;
                c
            }
        })
        .collect();
    for &l in &labels {
        stats.class_counts[l as usize - 1] += 1;
    }
    stats.runtime = start.map(|t| t.elapsed()).unwrap_or_default();
    Ok((
        LabelMap {
            width: w,
            height: h,
            labels,
        },
        stats,
    ))
}

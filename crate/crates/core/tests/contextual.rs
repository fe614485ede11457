use std::sync::atomic::{AtomicUsize, Ordering};

use fuzzy_evidence::contextual::{
    classify_image, classify_image_with, classify_pixel_evidential, ClassifyMode, ClassifyOptions,
    ConfidenceGrid, PixelScore, PixelScorer, RulebaseScorer,
};
use fuzzy_evidence::evidence::BpaMode;
use fuzzy_evidence::fuzzy::{ConfidenceVector, FuzzyRule, Rulebase, DEFAULT_Q};
use fuzzy_evidence::raster::{generate_scene, MultibandRaster, RasterData, SceneSpec};

/// Scores a one-band pixel as a one-hot vector on class `value + 1` and
/// counts how often it is asked.
struct OneHot {
    classes: usize,
    calls: AtomicUsize,
}

impl PixelScorer for OneHot {
    fn num_features(&self) -> usize {
        1
    }

    fn num_classes(&self) -> usize {
        self.classes
    }

    fn score(&self, x: &[f64]) -> PixelScore {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let k = x[0] as usize;
        let mut v = vec![0.0; self.classes];
        v[k] = 1.0;
        PixelScore {
            confidence: ConfidenceVector::new(v, 0.01).unwrap(),
            direct: k as u16 + 1,
        }
    }
}

fn blocky_image(w: usize, h: usize, classes: usize) -> MultibandRaster {
    let data = (0..w * h)
        .map(|i| (((i / w) / 4 + (i % w) / 4) % classes) as u8)
        .collect();
    MultibandRaster::new(w, h, 1, RasterData::U8(data)).unwrap()
}

fn small_scene() -> (MultibandRaster, fuzzy_evidence::GroundTruth) {
    let spec = SceneSpec {
        width: 40,
        height: 30,
        bands: 2,
        num_classes: 3,
        means: vec![vec![20.0, 20.0], vec![60.0, 30.0], vec![40.0, 70.0]],
        stds: vec![vec![12.0, 12.0]; 3],
        sites: 9,
        dtype: fuzzy_evidence::raster::Dtype::U8,
        noise_scale: 1.0,
        rng_seed: 11,
    };
    generate_scene(&spec).unwrap()
}

fn scene_rules() -> Rulebase {
    let r = |c, v: [f64; 2]| FuzzyRule::new(c, v.to_vec(), vec![15.0, 15.0]).unwrap();
    Rulebase::new(
        vec![r(1, [20.0, 20.0]), r(2, [60.0, 30.0]), r(3, [40.0, 70.0])],
        3,
        DEFAULT_Q,
        2.0,
    )
    .unwrap()
}

#[test]
fn every_pixel_is_scored_exactly_once() {
    let img = blocky_image(17, 13, 3);
    let scorer = OneHot {
        classes: 3,
        calls: AtomicUsize::new(0),
    };
    let (_, stats) = classify_image_with(&scorer, &img, &ClassifyOptions::default()).unwrap();
    assert_eq!(scorer.calls.load(Ordering::Relaxed), 17 * 13);
    assert_eq!(stats.border_pixels, 2 * 17 + 2 * 13 - 4);
}

#[test]
fn one_hot_regions_agree_with_direct_away_from_edges() {
    let img = blocky_image(24, 24, 2);
    let scorer = OneHot {
        classes: 2,
        calls: AtomicUsize::new(0),
    };
    let direct = classify_image_with(
        &scorer,
        &img,
        &ClassifyOptions {
            mode: ClassifyMode::Direct,
            ..Default::default()
        },
    )
    .unwrap()
    .0;
    let (evid, _) = classify_image_with(&scorer, &img, &ClassifyOptions::default()).unwrap();
    for row in 0..24usize {
        for col in 0..24usize {
            let uniform = (row.saturating_sub(1)..=(row + 1).min(23))
                .flat_map(|r| (col.saturating_sub(1)..=(col + 1).min(23)).map(move |c| (r, c)))
                .all(|(r, c)| direct.get(r, c) == direct.get(row, col));
            if uniform {
                assert_eq!(evid.get(row, col), direct.get(row, col), "pixel ({row}, {col})");
            }
        }
    }
}

#[test]
fn image_result_matches_per_pixel_reference() {
    let (img, _) = small_scene();
    let rb = scene_rules();
    for bpa_mode in [BpaMode::Frame, BpaMode::Raw] {
        let opts = ClassifyOptions {
            bpa_mode,
            ..Default::default()
        };
        let (map, stats) = classify_image(&rb, &img, &opts).unwrap();
        let grid = ConfidenceGrid::compute(
            &RulebaseScorer {
                rulebase: &rb,
                threshold: opts.threshold,
            },
            &img,
        )
        .unwrap();
        let mut fallbacks = 0;
        for row in 0..img.height {
            for col in 0..img.width {
                let direct = grid.at(row, col).direct;
                let interior = row > 0 && col > 0 && row + 1 < img.height && col + 1 < img.width;
                let expected = if interior {
                    classify_pixel_evidential(&grid, row, col, bpa_mode).unwrap_or_else(|_| {
                        fallbacks += 1;
                        direct
                    })
                } else {
                    direct
                };
                assert_eq!(map.get(row, col), expected);
            }
        }
        assert_eq!(stats.conflict_fallbacks + stats.degenerate_fallbacks, fallbacks);
        assert_eq!(stats.class_counts.iter().sum::<usize>(), img.num_pixels());
    }
}

#[test]
fn border_pixels_keep_the_direct_label() {
    let (img, _) = small_scene();
    let rb = scene_rules();
    let direct = classify_image(
        &rb,
        &img,
        &ClassifyOptions {
            mode: ClassifyMode::Direct,
            ..Default::default()
        },
    )
    .unwrap()
    .0;
    let evid = classify_image(&rb, &img, &ClassifyOptions::default()).unwrap().0;
    for col in 0..img.width {
        assert_eq!(evid.get(0, col), direct.get(0, col));
        assert_eq!(evid.get(img.height - 1, col), direct.get(img.height - 1, col));
    }
    for row in 0..img.height {
        assert_eq!(evid.get(row, 0), direct.get(row, 0));
        assert_eq!(evid.get(row, img.width - 1), direct.get(row, img.width - 1));
    }
}

#[test]
fn fusion_reduces_error_on_a_noisy_scene() {
    let (img, gt) = small_scene();
    let rb = scene_rules();
    let err = |mode| {
        let opts = ClassifyOptions {
            mode,
            ..Default::default()
        };
        let map = classify_image(&rb, &img, &opts).unwrap().0;
        fuzzy_evidence::confusion_matrix(&map, &gt, true).unwrap().error_rate()
    };
    let (d, e) = (err(ClassifyMode::Direct), err(ClassifyMode::Evidential));
    assert!(d > 0.0, "scene should be noisy enough to confuse the direct rule");
    assert!(e < d, "evidential {e} vs direct {d}");
}

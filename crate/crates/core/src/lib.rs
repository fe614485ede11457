//! Fuzzy rule-based classification of multiband rasters, with optional
//! contextual fusion of each pixel's 3x3 neighborhood through
//! Dempster-Shafer evidence combination.
//!
//! The pipeline is:
//!
//! 1. [`induction`]: labeled prototypes from a self-organizing map become
//!    fuzzy rules with Gaussian clauses.
//! 2. [`tuning`]: gradient descent on the winner/rival error sharpens them.
//! 3. [`contextual`]: pixels are labeled either by the best-firing rule or
//!    by combining eight neighbor BPAs ([`evidence`]) and taking the
//!    pignistic argmax.
//!
//! [`raster`] handles image I/O and synthetic scenes; [`eval`] scores label
//! maps and runs whole experiments.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contextual;
pub mod error;
pub mod eval;
pub mod evidence;
pub mod fuzzy;
pub mod induction;
pub mod raster;
pub mod tuning;

pub use contextual::{
    classify_image, classify_pixel_evidential, ClassifyMode, ClassifyOptions, ClassifyStats,
    ConfidenceGrid, LabelMap,
};
pub use error::{Error, Result};
pub use eval::{confusion_matrix, run_pipeline, ConfusionMatrix, RunConfig};
pub use evidence::{
    bel, bpa_from_confidences, combine_all, dempster_combine, pignistic, pl, BpaMode, ClassFrame,
    ClassSet, MassFunction, PignisticDistribution,
};
pub use fuzzy::{
    classify_direct, confidence_vector, firing_strength, gaussian_membership, soft_match, ClassId,
    ConfidenceVector, FuzzyRule, Rulebase,
};
pub use induction::{build_rulebase, init_spreads, train_prototypes, InductionConfig, LabeledSample};
pub use raster::{generate_scene, GroundTruth, MultibandRaster, SceneSpec};
pub use tuning::{error_e, gradient_step, select_rivals, tune, TuningConfig, TuningReport};

//! Turning labeled training data into an initial rulebase.
//!
//! Prototypes come from a 1-D self-organizing map trained without labels.
//! Units are then labeled by the majority class of the points they win and
//! pruned when they win nothing or are too impure, which lets the data decide
//! how many rules survive. Each prototype becomes one rule whose spreads are
//! estimated from the points nearest to it.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{ClassId, FuzzyRule, Rulebase};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: ClassId,
}

impl LabeledSample {
    pub fn new(features: Vec<f64>, label: ClassId) -> Self {
        Self { features, label }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub center: Vec<f64>,
    pub label: ClassId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    pub prototypes: Vec<Prototype>,
    pub num_classes: usize,
}

impl PrototypeSet {
    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn centers(&self) -> Vec<&[f64]> {
        self.prototypes.iter().map(|p| p.center.as_slice()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InductionConfig {
    pub k_w: f64,
    pub sofm_nodes: usize,
    pub sofm_epochs: usize,
    pub learning_rate_initial: f64,
    pub learning_rate_final: f64,
    pub radius_initial: f64,
    pub radius_final: f64,
    pub purity_threshold: f64,
    pub rng_seed: u64,
}

impl Default for InductionConfig {
    fn default() -> Self {
        Self {
            k_w: 2.0,
            sofm_nodes: 16,
            sofm_epochs: 20,
            learning_rate_initial: 0.5,
            learning_rate_final: 0.01,
            radius_initial: 4.0,
            radius_final: 0.25,
            purity_threshold: 0.5,
            rng_seed: 0,
        }
    }
}

impl InductionConfig {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if !(self.k_w > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "k_w must be positive, got {}",
                self.k_w
            )));
        }
        if self.sofm_nodes < num_classes {
            return Err(Error::InvalidParameter(format!(
                "sofm_nodes ({}) must be at least the class count ({num_classes})",
                self.sofm_nodes
            )));
        }
        if self.sofm_epochs == 0 {
            return Err(Error::InvalidParameter("sofm_epochs must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.purity_threshold) {
            return Err(Error::InvalidParameter(format!(
                "purity_threshold must lie in [0, 1], got {}",
                self.purity_threshold
            )));
        }
        if !(self.learning_rate_initial > 0.0 && self.learning_rate_final >= 0.0) {
            return Err(Error::InvalidParameter("learning rates must be positive".into()));
        }
        if !(self.radius_initial >= 0.0 && self.radius_final >= 0.0) {
            return Err(Error::InvalidParameter("radii must be non-negative".into()));
        }
        Ok(())
    }
}

/// Anything that can produce labeled prototypes from training data.
pub trait PrototypeGenerator {
    fn generate(&self, data: &[LabeledSample], num_classes: usize) -> Result<PrototypeSet>;
}

/// Unsupervised 1-D SOFM followed by majority labeling and pruning.
#[derive(Debug, Clone)]
pub struct SofmPrototypes<'a> {
    pub config: &'a InductionConfig,
}

impl PrototypeGenerator for SofmPrototypes<'_> {
    fn generate(&self, data: &[LabeledSample], num_classes: usize) -> Result<PrototypeSet> {
        let cfg = self.config;
        cfg.validate(num_classes)?;
        let weights = train_sofm(data, cfg);
        label_and_prune(weights, data, num_classes, cfg.purity_threshold)
    }
}

/// Class count implied by the data, checking that every class 1..=c occurs.
pub fn class_count(data: &[LabeledSample]) -> Result<usize> {
    let first = data.first().ok_or(Error::EmptyInput("training data"))?;
    let p = first.features.len();
    let mut c = 0usize;
    for s in data {
        if s.features.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: s.features.len(),
            });
        }
        if s.label == 0 {
            return Err(Error::InvalidParameter("training label 0 is reserved".into()));
        }
        c = c.max(s.label as usize);
    }
    let mut seen = vec![false; c];
    for s in data {
        seen[s.label as usize - 1] = true;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(Error::MissingClass {
            class: k as ClassId + 1,
            what: "training samples",
        });
    }
    Ok(c)
}

pub fn train_prototypes(data: &[LabeledSample], cfg: &InductionConfig) -> Result<PrototypeSet> {
    let c = class_count(data)?;
    SofmPrototypes { config: cfg }.generate(data, c)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest center, lowest index on ties.
pub fn nearest(centers: &[&[f64]], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = squared_distance(c, x);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn train_sofm(data: &[LabeledSample], cfg: &InductionConfig) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let n = data.len();
    let mut weights: Vec<Vec<f64>> = if cfg.sofm_nodes <= n {
        rand::seq::index::sample(&mut rng, n, cfg.sofm_nodes)
            .into_iter()
            .map(|i| data[i].features.clone())
            .collect()
    } else {
        (0..cfg.sofm_nodes)
            .map(|_| data[rng.random_range(0..n)].features.clone())
            .collect()
    };

    let total_steps = (cfg.sofm_epochs * n).max(2) as f64;
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0usize;
    for _ in 0..cfg.sofm_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let t = step as f64 / (total_steps - 1.0);
            let lr = cfg.learning_rate_initial
                + (cfg.learning_rate_final - cfg.learning_rate_initial) * t;
            let radius = cfg.radius_initial + (cfg.radius_final - cfg.radius_initial) * t;
            let x = &data[i].features;
            let refs: Vec<&[f64]> = weights.iter().map(Vec::as_slice).collect();
            let bmu = nearest(&refs, x);
            for (u, w) in weights.iter_mut().enumerate() {
                let d = u.abs_diff(bmu) as f64;
                let h = if u == bmu {
                    1.0
                } else if radius <= 0.0 {
                    0.0
                } else {
                    (-d * d / (2.0 * radius * radius)).exp()
                };
                if h < 1e-12 {
                    continue;
                }
                for (wj, xj) in w.iter_mut().zip(x) {
                    *wj += lr * h * (xj - *wj);
                }
            }
            step += 1;
        }
    }
    weights
}

fn label_and_prune(
    mut weights: Vec<Vec<f64>>,
    data: &[LabeledSample],
    num_classes: usize,
    purity_threshold: f64,
) -> Result<PrototypeSet> {
    loop {
        let refs: Vec<&[f64]> = weights.iter().map(Vec::as_slice).collect();
        let mut votes = vec![vec![0usize; num_classes]; weights.len()];
        for s in data {
            votes[nearest(&refs, &s.features)][s.label as usize - 1] += 1;
        }
        let keep: Vec<bool> = votes
            .iter()
            .map(|v| {
                let won: usize = v.iter().sum();
                let top = v.iter().copied().max().unwrap_or(0);
                won > 0 && top as f64 >= purity_threshold * won as f64
            })
            .collect();
        if keep.iter().all(|k| *k) {
            let prototypes: Vec<Prototype> = weights
                .into_iter()
                .zip(&votes)
                .map(|(center, v)| Prototype {
                    center,
                    label: majority(v),
                })
                .collect();
            return ensure_all_classes(prototypes, data, num_classes);
        }
        if !keep.iter().any(|k| *k) {
            // every unit is impure; keep the single best-supported unit so the
            // reassignment loop can make progress
            let best = votes
                .iter()
                .enumerate()
                .max_by_key(|(i, v)| (v.iter().copied().max().unwrap_or(0), usize::MAX - i))
                .map(|(i, _)| i)
                .unwrap_or(0);
            let w = weights.swap_remove(best);
            let v = votes.swap_remove(best);
            return ensure_all_classes(
                vec![Prototype {
                    center: w,
                    label: majority(&v),
                }],
                data,
                num_classes,
            );
        }
        weights = weights
            .into_iter()
            .zip(&keep)
            .filter_map(|(w, k)| k.then_some(w))
            .collect();
    }
}

fn majority(votes: &[usize]) -> ClassId {
    let mut best = 0;
    for (k, v) in votes.iter().enumerate() {
        if *v > votes[best] {
            best = k;
        }
    }
    best as ClassId + 1
}

/// Classes that lost every unit get a prototype at their sample mean.
fn ensure_all_classes(
    mut prototypes: Vec<Prototype>,
    data: &[LabeledSample],
    num_classes: usize,
) -> Result<PrototypeSet> {
    for class in 1..=num_classes as ClassId {
        if prototypes.iter().any(|p| p.label == class) {
            continue;
        }
        let members: Vec<&LabeledSample> = data.iter().filter(|s| s.label == class).collect();
        let p = members[0].features.len();
        let mut mean = vec![0.0; p];
        for s in &members {
            for (m, x) in mean.iter_mut().zip(&s.features) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= members.len() as f64);
        prototypes.push(Prototype {
            center: mean,
            label: class,
        });
    }
    Ok(PrototypeSet {
        prototypes,
        num_classes,
    })
}

/// Minimum admissible spread per feature: 1e-3 of the feature's range, or
/// 1e-3 when the feature is constant.
pub fn spread_floor(data: &[LabeledSample]) -> Vec<f64> {
    let Some(first) = data.first() else {
        return Vec::new();
    };
    let p = first.features.len();
    (0..p)
        .map(|j| {
            let (lo, hi) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s.features[j]), hi.max(s.features[j]))
            });
            let range = hi - lo;
            1e-3 * if range > 0.0 { range } else { 1.0 }
        })
        .collect()
}

/// Raw spreads `k_w * sqrt(sum (x_j - v_j)^2) / |X_i|` over the points
/// nearest to each prototype, without flooring.
pub fn raw_spreads(protos: &PrototypeSet, data: &[LabeledSample], k_w: f64) -> Vec<Vec<f64>> {
    let centers = protos.centers();
    let p = centers.first().map_or(0, |c| c.len());
    let mut sums = vec![vec![0.0; p]; centers.len()];
    let mut counts = vec![0usize; centers.len()];
    for s in data {
        let i = nearest(&centers, &s.features);
        counts[i] += 1;
        for (acc, (x, v)) in sums[i].iter_mut().zip(s.features.iter().zip(centers[i])) {
            *acc += (x - v) * (x - v);
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(row, n)| {
            row.into_iter()
                .map(|ss| if n == 0 { 0.0 } else { k_w * ss.sqrt() / n as f64 })
                .collect()
        })
        .collect()
}

pub fn init_spreads(protos: &PrototypeSet, data: &[LabeledSample], k_w: f64) -> Vec<Vec<f64>> {
    let floor = spread_floor(data);
    let mut spreads = raw_spreads(protos, data, k_w);
    for row in &mut spreads {
        for (s, f) in row.iter_mut().zip(&floor) {
            *s = s.max(*f);
        }
    }
    spreads
}

pub fn build_rulebase(
    protos: &PrototypeSet,
    spreads: &[Vec<f64>],
    q: f64,
    k_w: f64,
) -> Result<Rulebase> {
    if spreads.len() != protos.len() {
        return Err(Error::DimensionMismatch {
            expected: protos.len(),
            actual: spreads.len(),
        });
    }
    let rules = protos
        .prototypes
        .iter()
        .zip(spreads)
        .map(|(p, s)| FuzzyRule::new(p.label, p.center.clone(), s.clone()))
        .collect::<Result<Vec<_>>>()?;
    Rulebase::new(rules, protos.num_classes, q, k_w)
}

/// Prototypes, spreads and rules in one call.
pub fn induce_rulebase(data: &[LabeledSample], cfg: &InductionConfig, q: f64) -> Result<Rulebase> {
    let protos = train_prototypes(data, cfg)?;
    let spreads = init_spreads(&protos, data, cfg.k_w);
    build_rulebase(&protos, &spreads, q, cfg.k_w)
}

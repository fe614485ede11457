//! Dempster-Shafer evidence over a frame of classes.
//!
//! Focal elements are restricted to singletons `{C_k}`, unordered pairs
//! `{C_l, C_m}` and the whole frame. That family is closed under
//! intersection, so combination never leaves it.
//!
//! Two BPA construction modes exist. [`BpaMode::Raw`] keeps the masses as
//! normalized, where pair masses are divided by `2S` and the masses sum to
//! less than one. [`BpaMode::Frame`] assigns that missing mass to the whole
//! frame as uncommitted belief, which yields a proper BPA.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{argmax, ClassId, ConfidenceVector};

/// Masses smaller than this after normalization are set to zero.
pub const MASS_FLUSH: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BpaMode {
    Raw,
    #[default]
    Frame,
}

impl fmt::Display for BpaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BpaMode::Raw => "raw",
            BpaMode::Frame => "frame",
        })
    }
}

impl std::str::FromStr for BpaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(BpaMode::Raw),
            "frame" => Ok(BpaMode::Frame),
            other => Err(Error::InvalidParameter(format!("unknown bpa mode `{other}`"))),
        }
    }
}

/// The set of classes `{C_1, ..., C_c}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassFrame {
    num_classes: usize,
}

impl ClassFrame {
    pub fn new(num_classes: usize) -> Result<Self> {
        if !(2..=ClassSet::CAPACITY).contains(&num_classes) {
            return Err(Error::InvalidParameter(format!(
                "frame needs 2..={} classes, got {num_classes}",
                ClassSet::CAPACITY
            )));
        }
        Ok(Self { num_classes })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_pairs(&self) -> usize {
        self.num_classes * (self.num_classes - 1) / 2
    }

    /// Storage index of the pair `{l, m}` for 0-based `l < m`.
    pub fn pair_index(&self, l: usize, m: usize) -> usize {
        debug_assert!(l < m && m < self.num_classes);
        l * (2 * self.num_classes - l - 1) / 2 + (m - l - 1)
    }

    /// 0-based pair members in storage order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let c = self.num_classes;
        (0..c).flat_map(move |l| (l + 1..c).map(move |m| (l, m)))
    }

    pub fn full(&self) -> ClassSet {
        ClassSet::full(self.num_classes)
    }
}

/// A subset of the frame as a bitmask over 0-based class indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ClassSet(pub u64);

impl ClassSet {
    pub const CAPACITY: usize = 64;

    pub fn empty() -> Self {
        Self(0)
    }

    pub fn full(num_classes: usize) -> Self {
        if num_classes >= 64 {
            Self(u64::MAX)
        } else {
            Self((1u64 << num_classes) - 1)
        }
    }

    pub fn singleton(index: usize) -> Self {
        Self(1 << index)
    }

    pub fn pair(l: usize, m: usize) -> Self {
        Self((1 << l) | (1 << m))
    }

    /// From 1-based class ids.
    pub fn of_classes(classes: &[ClassId]) -> Self {
        Self(classes.iter().fold(0, |acc, &k| acc | 1 << (k - 1)))
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0 >> index & 1 == 1
    }

    pub fn intersection(self, other: Self) -> Self {
        Self(self.0 & other.0)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn complement(self, num_classes: usize) -> Self {
        Self(!self.0 & Self::full(num_classes).0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassFunction {
    frame: ClassFrame,
    singletons: Vec<f64>,
    pairs: Vec<f64>,
    frame_mass: f64,
}

impl MassFunction {
    pub fn zero(frame: ClassFrame) -> Self {
        Self {
            frame,
            singletons: vec![0.0; frame.num_classes()],
            pairs: vec![0.0; frame.num_pairs()],
            frame_mass: 0.0,
        }
    }

    pub fn vacuous(frame: ClassFrame) -> Self {
        Self {
            frame_mass: 1.0,
            ..Self::zero(frame)
        }
    }

    pub fn new(
        frame: ClassFrame,
        singletons: Vec<f64>,
        pairs: Vec<f64>,
        frame_mass: f64,
    ) -> Result<Self> {
        if singletons.len() != frame.num_classes() {
            return Err(Error::DimensionMismatch {
                expected: frame.num_classes(),
                actual: singletons.len(),
            });
        }
        if pairs.len() != frame.num_pairs() {
            return Err(Error::DimensionMismatch {
                expected: frame.num_pairs(),
                actual: pairs.len(),
            });
        }
        let m = Self {
            frame,
            singletons,
            pairs,
            frame_mass,
        };
        if m.values().any(|v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("masses must be finite and non-negative".into()));
        }
        if m.total() > 1.0 + 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "masses sum to {} > 1",
                m.total()
            )));
        }
        Ok(m)
    }

    /// Point mass on one class (1-based id).
    pub fn certain(frame: ClassFrame, class: ClassId) -> Self {
        let mut m = Self::zero(frame);
        m.singletons[class as usize - 1] = 1.0;
        m
    }

    pub fn frame(&self) -> ClassFrame {
        self.frame
    }

    pub fn singletons(&self) -> &[f64] {
        &self.singletons
    }

    pub fn pairs(&self) -> &[f64] {
        &self.pairs
    }

    pub fn frame_mass(&self) -> f64 {
        self.frame_mass
    }

    /// Mass of the pair of 1-based classes `a` and `b`.
    pub fn pair(&self, a: ClassId, b: ClassId) -> f64 {
        let (l, m) = (a.min(b) as usize - 1, a.max(b) as usize - 1);
        self.pairs[self.frame.pair_index(l, m)]
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.singletons
            .iter()
            .chain(&self.pairs)
            .copied()
            .chain(std::iter::once(self.frame_mass))
    }

    pub fn total(&self) -> f64 {
        self.values().sum()
    }

    /// Every stored bucket with its set, including zero masses. With two
    /// classes the pair and the frame denote the same set.
    pub fn buckets(&self) -> impl Iterator<Item = (ClassSet, f64)> + '_ {
        let singles = self
            .singletons
            .iter()
            .enumerate()
            .map(|(k, &m)| (ClassSet::singleton(k), m));
        let pairs = self
            .frame
            .pairs()
            .zip(&self.pairs)
            .map(|((l, m), &v)| (ClassSet::pair(l, m), v));
        singles
            .chain(pairs)
            .chain(std::iter::once((self.frame.full(), self.frame_mass)))
    }

    pub fn focal_elements(&self) -> impl Iterator<Item = (ClassSet, f64)> + '_ {
        self.buckets().filter(|(_, m)| *m > 0.0)
    }

    /// Total mass carried by exactly the set `a`.
    pub fn mass_of(&self, a: ClassSet) -> f64 {
        self.buckets().filter(|(s, _)| *s == a).map(|(_, m)| m).sum()
    }

    fn add(&mut self, set: ClassSet, mass: f64) {
        let c = self.frame.num_classes();
        match set.len() {
            1 => self.singletons[set.0.trailing_zeros() as usize] += mass,
            2 => {
                let l = set.0.trailing_zeros() as usize;
                let m = 63 - set.0.leading_zeros() as usize;
                let idx = self.frame.pair_index(l, m);
                self.pairs[idx] += mass;
            }
            n if n == c => self.frame_mass += mass,
            n => unreachable!("focal family is closed under intersection, got |A| = {n}"),
        }
    }

    fn scale_and_flush(&mut self, factor: f64) {
        let fix = |v: &mut f64| {
            *v *= factor;
            if *v < MASS_FLUSH {
                *v = 0.0;
            }
        };
        self.singletons.iter_mut().for_each(fix);
        self.pairs.iter_mut().for_each(fix);
        fix(&mut self.frame_mass);
    }
}

/// Build the BPA contributed by a center pixel (`cm0`) and one neighbor
/// (`cmi`).
///
/// The singleton numerator for class `k` is `avg(a_k^i, a_k^0) * exp(-(a_k^i - a_k^0)^2)`
/// and the pair numerator for `{l, m}` is the symmetric sum of the cross terms
/// `avg(a_l^i, a_m^0) * exp(-(a_l^i - a_m^0)^2)` and `avg(a_m^i, a_l^0) * exp(-(a_m^i - a_l^0)^2)`.
/// With `S` the sum of all numerators, singletons receive `num / S` and pairs
/// `num / (2S)`.
pub fn bpa_from_confidences(
    cm0: &ConfidenceVector,
    cmi: &ConfidenceVector,
    mode: BpaMode,
) -> Result<MassFunction> {
    if cm0.len() != cmi.len() {
        return Err(Error::DimensionMismatch {
            expected: cm0.len(),
            actual: cmi.len(),
        });
    }
    let frame = ClassFrame::new(cm0.len())?;
    let (a0, ai) = (cm0.as_slice(), cmi.as_slice());
    let support = |x: f64, y: f64| 0.5 * (x + y) * (-(x - y) * (x - y)).exp();

    let singles: Vec<f64> = a0.iter().zip(ai).map(|(&c, &n)| support(n, c)).collect();
    let pairs: Vec<f64> = frame
        .pairs()
        .map(|(l, m)| support(ai[l], a0[m]) + support(ai[m], a0[l]))
        .collect();
    let s: f64 = singles.iter().sum::<f64>() + pairs.iter().sum::<f64>();

    if !(s > 0.0) {
        return match mode {
            BpaMode::Frame => Ok(MassFunction::vacuous(frame)),
            BpaMode::Raw => Err(Error::DegenerateEvidence),
        };
    }

    let mut m = MassFunction {
        frame,
        singletons: singles.into_iter().map(|v| v / s).collect(),
        pairs: pairs.into_iter().map(|v| v / (2.0 * s)).collect(),
        frame_mass: 0.0,
    };
    m.scale_and_flush(1.0);
    if mode == BpaMode::Frame {
        m.frame_mass = (1.0 - m.total()).max(0.0);
        if m.frame_mass < MASS_FLUSH {
            m.frame_mass = 0.0;
        }
    }
    Ok(m)
}

/// `Bel(A)`: mass of the focal elements contained in `A`.
pub fn bel(m: &MassFunction, a: ClassSet) -> f64 {
    m.focal_elements()
        .filter(|(b, _)| b.is_subset_of(a))
        .map(|(_, v)| v)
        .sum()
}

/// `Pl(A)`: mass of the focal elements meeting `A`.
pub fn pl(m: &MassFunction, a: ClassSet) -> f64 {
    m.focal_elements()
        .filter(|(b, _)| !b.intersection(a).is_empty())
        .map(|(_, v)| v)
        .sum()
}

/// Dempster's rule: products of focal masses are accumulated on the
/// intersections, conflict `K` is the product mass landing on the empty set,
/// and the result is divided by `1 - K`.
pub fn dempster_combine(m1: &MassFunction, m2: &MassFunction) -> Result<MassFunction> {
    if m1.frame != m2.frame {
        return Err(Error::DimensionMismatch {
            expected: m1.frame.num_classes(),
            actual: m2.frame.num_classes(),
        });
    }
    let mut out = MassFunction::zero(m1.frame);
    let mut conflict = 0.0;
    for (a, ma) in m1.focal_elements() {
        for (b, mb) in m2.focal_elements() {
            let inter = a.intersection(b);
            if inter.is_empty() {
                conflict += ma * mb;
            } else {
                out.add(inter, ma * mb);
            }
        }
    }
    let norm = 1.0 - conflict;
    if !(norm > 0.0) || !(out.total() > 0.0) {
        return Err(Error::TotalConflict { k: conflict });
    }
    out.scale_and_flush(1.0 / norm);
    Ok(out)
}

/// Left fold `((m_1 + m_2) + m_3) + ...` under Dempster's rule.
pub fn combine_all(masses: &[MassFunction]) -> Result<MassFunction> {
    let (first, rest) = masses
        .split_first()
        .ok_or(Error::EmptyInput("mass functions to combine"))?;
    rest.iter()
        .enumerate()
        .try_fold(first.clone(), |acc, (i, m)| {
            dempster_combine(&acc, m).map_err(|e| match e {
                Error::TotalConflict { k } => Error::TotalConflictAt { position: i + 1, k },
                other => other,
            })
        })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PignisticDistribution {
    pub probs: Vec<f64>,
}

impl PignisticDistribution {
    /// Most probable class, lowest id on ties.
    pub fn decision(&self) -> ClassId {
        argmax(&self.probs) as ClassId + 1
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Spread each focal mass evenly over its members:
/// `P(C_k) = m({C_k}) + sum_l m({C_k, C_l}) / 2 + m(frame) / c`.
pub fn pignistic(m: &MassFunction) -> PignisticDistribution {
    let c = m.frame.num_classes();
    let mut probs = m.singletons.clone();
    for ((l, k), &v) in m.frame.pairs().zip(&m.pairs) {
        probs[l] += 0.5 * v;
        probs[k] += 0.5 * v;
    }
    let share = m.frame_mass / c as f64;
    probs.iter_mut().for_each(|p| *p += share);
    PignisticDistribution { probs }
}

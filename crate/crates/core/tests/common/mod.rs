//! Reference implementations used as test oracles. Nothing here calls into
//! the library's numerical code.
#![allow(dead_code)]

use fuzzy_evidence::evidence::{ClassFrame, ClassSet, MassFunction};
use fuzzy_evidence::fuzzy::{FuzzyRule, Rulebase};
use rand::{Rng, RngCore};

/// Mass vector indexed by subset bitmask over `c` classes (index 0 is the
/// empty set).
pub type PowerSetMass = Vec<f64>;

pub fn to_power_set(m: &MassFunction) -> PowerSetMass {
    let c = m.frame().num_classes();
    let mut out = vec![0.0; 1 << c];
    for (set, v) in m.buckets() {
        out[set.0 as usize] += v;
    }
    out
}

/// Dempster's rule over the full power set. `None` on total conflict.
pub fn brute_force_combine(a: &PowerSetMass, b: &PowerSetMass) -> Option<PowerSetMass> {
    let mut out = vec![0.0; a.len()];
    let mut conflict = 0.0;
    for (x, &ma) in a.iter().enumerate().skip(1) {
        for (y, &mb) in b.iter().enumerate().skip(1) {
            let z = x & y;
            if z == 0 {
                conflict += ma * mb;
            } else {
                out[z] += ma * mb;
            }
        }
    }
    let norm = 1.0 - conflict;
    if norm <= 0.0 || out.iter().sum::<f64>() <= 0.0 {
        return None;
    }
    Some(out.into_iter().map(|v| v / norm).collect())
}

/// Largest focal-element-wise difference between the library result and the
/// power-set result.
pub fn max_deviation(m: &MassFunction, reference: &PowerSetMass) -> f64 {
    (1..reference.len())
        .map(|s| (m.mass_of(ClassSet(s as u64)) - reference[s]).abs())
        .fold(0.0, f64::max)
}

/// A normalized mass function over singletons, pairs and the frame. Roughly
/// half the buckets are empty; one draw in twenty is a point mass so that
/// total conflict also gets exercised.
pub fn random_mass(rng: &mut impl RngCore, c: usize) -> MassFunction {
    let frame = ClassFrame::new(c).unwrap();
    if rng.random_bool(0.05) {
        return MassFunction::certain(frame, rng.random_range(1..=c as u16));
    }
    loop {
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| if rng.random_bool(0.5) { rng.random::<f64>() } else { 0.0 })
                .collect()
        };
        let s = draw(c);
        let p = draw(frame.num_pairs());
        let f = draw(1)[0];
        let total: f64 = s.iter().chain(&p).sum::<f64>() + f;
        if total <= 0.0 {
            continue;
        }
        let norm = |v: Vec<f64>| v.into_iter().map(|x| x / total).collect::<Vec<_>>();
        return MassFunction::new(frame, norm(s), norm(p), f / total).unwrap();
    }
}

/// Firing strength straight from the definitions:
/// `((1/n) * sum exp(-(x-v)^2/s^2)^q)^(1/q)`.
pub fn naive_firing(centers: &[f64], spreads: &[f64], x: &[f64], q: f64) -> f64 {
    let n = x.len() as f64;
    let sum: f64 = x
        .iter()
        .zip(centers)
        .zip(spreads)
        .map(|((xj, v), s)| (-((xj - v) / s).powi(2)).exp().powf(q))
        .sum();
    (sum / n).powf(1.0 / q)
}

/// Random rulebase with every class present, and a sample near one of its
/// rules so that no membership underflows.
pub fn random_instance(rng: &mut impl RngCore) -> (Rulebase, Vec<f64>, u16) {
    let c = rng.random_range(2..=4usize);
    let p = rng.random_range(1..=6usize);
    let n_rules = rng.random_range(c..=c + 4);
    let q = -rng.random_range(1.0..20.0);
    let rules: Vec<FuzzyRule> = (0..n_rules)
        .map(|i| {
            let class = if i < c { i + 1 } else { rng.random_range(1..=c) } as u16;
            let centers = (0..p).map(|_| rng.random_range(0.0..10.0)).collect();
            let spreads = (0..p).map(|_| rng.random_range(0.5..4.0)).collect();
            FuzzyRule::new(class, centers, spreads).unwrap()
        })
        .collect();
    let anchor = &rules[rng.random_range(0..n_rules)];
    let x: Vec<f64> = anchor
        .centers
        .iter()
        .zip(&anchor.spreads)
        .map(|(v, s)| v + s * rng.random_range(-1.5..1.5))
        .collect();
    let label = rng.random_range(1..=c as u16);
    (Rulebase::new(rules, c, q, 2.0).unwrap(), x, label)
}

//! Gaussian memberships, softmin firing strengths and the direct decision.
//!
//! A rule reads "x_1 is CLOSE TO v_1 AND ... AND x_p is CLOSE TO v_p then
//! class is k". Each clause is a Gaussian `exp(-(x - v)^2 / sigma^2)` and the
//! conjunction is the soft-match power mean with a negative exponent `q`.
//!
//! Everything is evaluated in the log domain: with `q = -10` a membership of
//! `1e-40` would already overflow `mu^q`, so the aggregate is formed with the
//! log-sum-exp trick and exponentiated once at the end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class identifiers are 1-based; 0 is reserved for "unlabeled".
pub type ClassId = u16;

pub const DEFAULT_Q: f64 = -10.0;

/// Confidence measures below this are treated as no support at all.
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.01;

/// Lower clamp for `ln(mu)`; keeps `q * ln(mu)` and its exponentials finite.
pub const LOG_MEMBERSHIP_FLOOR: f64 = -700.0;

/// `ln mu(x; v, sigma)`, clamped at [`LOG_MEMBERSHIP_FLOOR`].
#[inline]
pub fn log_membership(x: f64, v: f64, sigma: f64) -> f64 {
    let d = (x - v) / sigma;
    (-d * d).max(LOG_MEMBERSHIP_FLOOR)
}

pub fn gaussian_membership(x: f64, v: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "membership spread must be positive and finite, got {sigma}"
        )));
    }
    if !x.is_finite() || !v.is_finite() {
        return Err(Error::InvalidParameter("non-finite membership input".into()));
    }
    let d = (x - v) / sigma;
    Ok((-d * d).exp())
}

/// `ln SM` computed from the logs of the aggregated values.
pub(crate) fn log_soft_match(log_values: &[f64], q: f64) -> f64 {
    let max_t = log_values
        .iter()
        .map(|&l| q * l)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_values.iter().map(|&l| (q * l - max_t).exp()).sum();
    (max_t + sum.ln() - (log_values.len() as f64).ln()) / q
}

/// Soft-match aggregate `((x_1^q + ... + x_n^q) / n)^(1/q)`.
pub fn soft_match(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("soft_match values"));
    }
    if q == 0.0 || !q.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "soft-match exponent must be finite and nonzero, got {q}"
        )));
    }
    if let Some(bad) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "soft-match inputs must be positive and finite, got {bad}"
        )));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    Ok(log_soft_match(&logs, q).exp())
}

/// One fuzzy rule: a labeled prototype with per-feature Gaussian spreads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRule {
    #[serde(rename = "class")]
    pub class: ClassId,
    #[serde(rename = "v")]
    pub centers: Vec<f64>,
    #[serde(rename = "sigma")]
    pub spreads: Vec<f64>,
}

impl FuzzyRule {
    pub fn new(class: ClassId, centers: Vec<f64>, spreads: Vec<f64>) -> Result<Self> {
        if centers.len() != spreads.len() {
            return Err(Error::DimensionMismatch {
                expected: centers.len(),
                actual: spreads.len(),
            });
        }
        if centers.is_empty() {
            return Err(Error::EmptyInput("rule centers"));
        }
        if let Some(s) = spreads.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rule spread must be positive and finite, got {s}"
            )));
        }
        if centers.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite rule center".into()));
        }
        Ok(Self {
            class,
            centers,
            spreads,
        })
    }

    pub fn num_features(&self) -> usize {
        self.centers.len()
    }

    /// Per-clause `ln mu`, clamped. `x` must have the rule's dimension.
    pub(crate) fn log_memberships(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.centers)
            .zip(&self.spreads)
            .map(|((&xj, &v), &s)| log_membership(xj, v, s))
            .collect()
    }

    pub(crate) fn log_firing(&self, x: &[f64], q: f64) -> f64 {
        log_soft_match(&self.log_memberships(x), q)
    }

    /// Firing strength without dimension checks.
    pub(crate) fn firing(&self, x: &[f64], q: f64) -> f64 {
        self.log_firing(x, q).exp()
    }
}

pub fn firing_strength(rule: &FuzzyRule, x: &[f64], q: f64) -> Result<f64> {
    check_dim(rule.num_features(), x)?;
    Ok(rule.firing(x, q))
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: x.len(),
        });
    }
    Ok(())
}

/// Per-class confidence measures: the maximum firing strength among the
/// rules of each class, with values under the threshold set to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceVector(Vec<f64>);

impl ConfidenceVector {
    pub fn new(mut values: Vec<f64>, threshold: f64) -> Result<Self> {
        for v in &mut values {
            if !(0.0..=1.0).contains(v) {
                return Err(Error::InvalidParameter(format!(
                    "confidence must lie in [0, 1], got {v}"
                )));
            }
            if *v < threshold {
                *v = 0.0;
            }
        }
        Ok(Self(values))
    }

    pub fn zeros(num_classes: usize) -> Self {
        Self(vec![0.0; num_classes])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Class with the largest confidence, lowest id on ties.
    pub fn argmax(&self) -> ClassId {
        argmax(&self.0) as ClassId + 1
    }
}

/// Index of the first maximal element.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectDecision {
    pub class: ClassId,
    pub rule_index: usize,
    pub firing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RulebaseRepr")]
pub struct Rulebase {
    pub q: f64,
    pub k_w: f64,
    pub num_features: usize,
    pub num_classes: usize,
    pub rules: Vec<FuzzyRule>,
    /// Seeds and configuration echo of the run that produced the rules.
    #[serde(default)]
    pub provenance: serde_json::Map<String, serde_json::Value>,
}

#[derive(Deserialize)]
struct RulebaseRepr {
    q: f64,
    k_w: f64,
    num_features: usize,
    num_classes: usize,
    rules: Vec<FuzzyRule>,
    #[serde(default)]
    provenance: serde_json::Map<String, serde_json::Value>,
}

impl TryFrom<RulebaseRepr> for Rulebase {
    type Error = Error;

    fn try_from(r: RulebaseRepr) -> Result<Self> {
        let rules = r
            .rules
            .into_iter()
            .map(|rule| FuzzyRule::new(rule.class, rule.centers, rule.spreads))
            .collect::<Result<Vec<_>>>()?;
        let mut rb = Rulebase::new(rules, r.num_classes, r.q, r.k_w)?;
        if rb.num_features != r.num_features {
            return Err(Error::DimensionMismatch {
                expected: r.num_features,
                actual: rb.num_features,
            });
        }
        rb.provenance = r.provenance;
        Ok(rb)
    }
}

impl Rulebase {
    pub fn new(rules: Vec<FuzzyRule>, num_classes: usize, q: f64, k_w: f64) -> Result<Self> {
        let first = rules.first().ok_or(Error::EmptyInput("rulebase rules"))?;
        let p = first.num_features();
        if let Some(bad) = rules.iter().find(|r| r.num_features() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: bad.num_features(),
            });
        }
        if !(q < 0.0) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "softmin exponent q must be negative, got {q}"
            )));
        }
        if !(k_w > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "k_w must be positive, got {k_w}"
            )));
        }
        if num_classes == 0 || num_classes > ClassId::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "invalid class count {num_classes}"
            )));
        }
        if let Some(r) = rules
            .iter()
            .find(|r| r.class == 0 || r.class as usize > num_classes)
        {
            return Err(Error::InvalidParameter(format!(
                "rule class {} outside 1..={num_classes}",
                r.class
            )));
        }
        for class in 1..=num_classes as ClassId {
            if !rules.iter().any(|r| r.class == class) {
                return Err(Error::MissingClass {
                    class,
                    what: "rule",
                });
            }
        }
        Ok(Self {
            q,
            k_w,
            num_features: p,
            num_classes,
            rules,
            provenance: Default::default(),
        })
    }

    pub fn num_rules(&self) -> usize {
        self.rules.len()
    }

    pub fn firing_strengths(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.num_features, x)?;
        Ok(self.rules.iter().map(|r| r.firing(x, self.q)).collect())
    }

    /// `ln alpha` per rule. Rankings use these so that rules whose firing
    /// underflows to zero still order correctly.
    pub fn log_firing_strengths(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.num_features, x)?;
        Ok(self.rules.iter().map(|r| r.log_firing(x, self.q)).collect())
    }

    /// Per-class maxima of the firing strengths, before thresholding.
    pub(crate) fn class_maxima(&self, log_firings: &[f64]) -> Vec<f64> {
        let mut best = vec![0.0f64; self.num_classes];
        for (rule, &l) in self.rules.iter().zip(log_firings) {
            let slot = &mut best[rule.class as usize - 1];
            *slot = slot.max(l.exp());
        }
        best
    }

    pub fn confidence(&self, x: &[f64], threshold: f64) -> Result<ConfidenceVector> {
        let logs = self.log_firing_strengths(x)?;
        ConfidenceVector::new(self.class_maxima(&logs), threshold)
    }

    pub fn classify_direct(&self, x: &[f64]) -> Result<DirectDecision> {
        let logs = self.log_firing_strengths(x)?;
        Ok(self.decide(&logs))
    }

    pub(crate) fn decide(&self, log_firings: &[f64]) -> DirectDecision {
        let i = argmax(log_firings);
        DirectDecision {
            class: self.rules[i].class,
            rule_index: i,
            firing: log_firings[i].exp(),
        }
    }
}

/// Confidence vector at the default threshold of 0.01.
pub fn confidence_vector(rb: &Rulebase, x: &[f64]) -> Result<ConfidenceVector> {
    rb.confidence(x, DEFAULT_CONFIDENCE_THRESHOLD)
}

pub fn classify_direct(rb: &Rulebase, x: &[f64]) -> Result<DirectDecision> {
    rb.classify_direct(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rule(class: ClassId, v: &[f64], s: &[f64]) -> FuzzyRule {
        FuzzyRule::new(class, v.to_vec(), s.to_vec()).unwrap()
    }

    #[test]
    fn membership_values() {
        assert_eq!(gaussian_membership(3.0, 3.0, 2.0).unwrap(), 1.0);
        assert_relative_eq!(
            gaussian_membership(5.0, 3.0, 2.0).unwrap(),
            0.367_879_441_171_442_3,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            gaussian_membership(7.0, 3.0, 2.0).unwrap(),
            0.018_315_638_888_734_18,
            epsilon = 1e-12
        );
        assert!(gaussian_membership(1.0, 0.0, 0.0).is_err());
        assert!(gaussian_membership(1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn soft_match_values() {
        assert_relative_eq!(soft_match(&[0.4; 5], -10.0).unwrap(), 0.4, epsilon = 1e-14);
        assert_relative_eq!(soft_match(&[0.4; 5], 3.0).unwrap(), 0.4, epsilon = 1e-14);
        // ((0.5^-10 + 1) / 2)^(-1/10) = (1025/2)^(-0.1), 40-digit reference value
        assert_relative_eq!(
            soft_match(&[0.5, 1.0], -10.0).unwrap(),
            0.535_834_426_668_723_7,
            epsilon = 1e-12
        );
        assert!((soft_match(&[0.2, 0.9, 0.9], -1000.0).unwrap() - 0.2).abs() < 1e-3);
        assert!(soft_match(&[], -10.0).is_err());
        assert!(soft_match(&[0.5], 0.0).is_err());
        assert!(soft_match(&[0.0, 0.5], -10.0).is_err());
    }

    #[test]
    fn firing_strength_cases() {
        let r = rule(1, &[1.0, 2.0], &[1.0, 1.0]);
        assert_eq!(firing_strength(&r, &[1.0, 2.0], -10.0).unwrap(), 1.0);

        let single = rule(1, &[0.0], &[2.0]);
        assert_relative_eq!(
            firing_strength(&single, &[1.0], -10.0).unwrap(),
            gaussian_membership(1.0, 0.0, 2.0).unwrap(),
            epsilon = 1e-14
        );

        // memberships (0.5, 1.0): x offset by sqrt(ln 2) sigma in the first clause
        let off = std::f64::consts::LN_2.sqrt();
        assert_relative_eq!(
            firing_strength(&r, &[1.0 + off, 2.0], -10.0).unwrap(),
            0.535_834_426_668_723_7,
            epsilon = 1e-12
        );
        assert!(firing_strength(&r, &[1.0], -10.0).is_err());
    }

    #[test]
    fn firing_survives_membership_underflow() {
        let r = rule(1, &[0.0, 0.0], &[1.0, 1.0]);
        let a = firing_strength(&r, &[1e6, 0.0], -10.0).unwrap();
        assert!(a.is_finite() && a >= 0.0);
        assert!(a < 1e-200);
    }

    #[test]
    fn confidence_cases() {
        let rb = Rulebase::new(
            vec![
                rule(1, &[0.0], &[1.0]),
                rule(2, &[10.0], &[1.0]),
                rule(2, &[20.0], &[1.0]),
            ],
            2,
            DEFAULT_Q,
            2.0,
        )
        .unwrap();
        let cm = confidence_vector(&rb, &[10.0]).unwrap();
        assert_eq!(cm.as_slice()[1], 1.0);
        assert_eq!(cm.as_slice()[0], 0.0);
        assert_eq!(confidence_vector(&rb, &[1000.0]).unwrap().as_slice(), &[0.0, 0.0]);

        // class-2 rules at distances giving 0.3 and 0.7 firing
        let d3 = (-(0.3f64).ln()).sqrt();
        let d7 = (-(0.7f64).ln()).sqrt();
        let rb = Rulebase::new(
            vec![
                rule(1, &[-100.0], &[1.0]),
                rule(2, &[d3], &[1.0]),
                rule(2, &[d7], &[1.0]),
            ],
            2,
            DEFAULT_Q,
            2.0,
        )
        .unwrap();
        let cm = confidence_vector(&rb, &[0.0]).unwrap();
        assert_relative_eq!(cm.as_slice()[1], 0.7, epsilon = 1e-12);
    }

    #[test]
    fn direct_decision_cases() {
        let rb = Rulebase::new(vec![rule(3, &[5.0], &[1.0])], 3, DEFAULT_Q, 2.0);
        // classes 1 and 2 have no rule
        assert!(matches!(rb, Err(Error::MissingClass { class: 1, .. })));

        let rb = Rulebase::new(
            vec![
                rule(1, &[0.0], &[1.0]),
                rule(2, &[1.0], &[1.0]),
                rule(1, &[5.0], &[1.0]),
                rule(3, &[6.0], &[1.0]),
                rule(1, &[8.0], &[1.0]),
                rule(3, &[4.0], &[1.0]),
            ],
            3,
            DEFAULT_Q,
            2.0,
        )
        .unwrap();
        let d = classify_direct(&rb, &[1.0]).unwrap();
        assert_eq!((d.class, d.rule_index, d.firing), (2, 1, 1.0));
        // 5.0 is equidistant from rules 3 and 5 (6.0 and 4.0) but exactly on rule 2
        let d = classify_direct(&rb, &[5.0]).unwrap();
        assert_eq!(d.rule_index, 2);
        // exact tie between rules 2 (center 5) and 5 (center 4): lowest index wins
        let d = classify_direct(&rb, &[4.5]).unwrap();
        assert_eq!((d.rule_index, d.class), (2, 1));
    }

    #[test]
    fn single_rule_class_three() {
        let rb = Rulebase::new(
            vec![rule(3, &[5.0], &[1.0]), rule(1, &[1e9], &[1.0]), rule(2, &[1e9], &[1.0])],
            3,
            DEFAULT_Q,
            2.0,
        )
        .unwrap();
        for x in [-3.0, 0.0, 5.0, 100.0] {
            assert_eq!(classify_direct(&rb, &[x]).unwrap().class, 3);
        }
    }

    #[test]
    fn rulebase_json_round_trip() {
        let rb = Rulebase::new(
            vec![
                rule(1, &[0.1, 1.0 / 3.0], &[0.7, 1e-3]),
                rule(2, &[255.0, 2.0f64.sqrt()], &[12.5, 3.3]),
            ],
            2,
            DEFAULT_Q,
            2.0,
        )
        .unwrap();
        let text = serde_json::to_string(&rb).unwrap();
        let back: Rulebase = serde_json::from_str(&text).unwrap();
        assert_eq!(rb, back);
        let bad = text.replace("\"num_classes\":2", "\"num_classes\":3");
        assert!(serde_json::from_str::<Rulebase>(&bad).is_err());
    }

    fn naive_argmax(rb: &Rulebase, x: &[f64]) -> usize {
        let f: Vec<f64> = rb
            .rules
            .iter()
            .map(|r| {
                let s: f64 = r
                    .centers
                    .iter()
                    .zip(&r.spreads)
                    .zip(x)
                    .map(|((v, s), x)| (-(x - v) * (x - v) / (s * s)).exp().powf(rb.q))
                    .sum();
                (s / x.len() as f64).powf(1.0 / rb.q)
            })
            .collect();
        let mut best = 0;
        for i in 1..f.len() {
            if f[i] > f[best] {
                best = i;
            }
        }
        best
    }

    proptest! {
        #[test]
        fn membership_bounded(x in -1e3f64..1e3, v in -1e3f64..1e3, s in 1e-3f64..1e3) {
            let m = gaussian_membership(x, v, s).unwrap();
            prop_assert!((0.0..=1.0).contains(&m));
            // the open lower bound only holds before underflow
            if ((x - v) / s).powi(2) < 700.0 {
                prop_assert!(m > 0.0);
            }
        }

        #[test]
        fn softmin_sandwich(values in prop::collection::vec(0.01f64..1.0, 1..10)) {
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(0.0, f64::max);
            let mut last = f64::INFINITY;
            for q in [-10.0, -100.0, -1000.0] {
                let sm = soft_match(&values, q).unwrap();
                prop_assert!(sm >= lo * (1.0 - 1e-12) && sm <= hi * (1.0 + 1e-12));
                let dist = sm - lo;
                prop_assert!(dist <= last + 1e-15);
                last = dist;
            }
        }

        #[test]
        fn softmin_permutation_invariant(values in prop::collection::vec(0.01f64..1.0, 2..10), rot in 0usize..10) {
            let mut shuffled = values.clone();
            let n = shuffled.len();
            shuffled.rotate_left(rot % n);
            shuffled.reverse();
            let a = soft_match(&values, -10.0).unwrap();
            let b = soft_match(&shuffled, -10.0).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }

        #[test]
        fn firing_translation_consistent(
            x in prop::collection::vec(-10.0f64..10.0, 3),
            v in prop::collection::vec(-10.0f64..10.0, 3),
            s in prop::collection::vec(0.5f64..5.0, 3),
            shift in prop::collection::vec(-100.0f64..100.0, 3),
        ) {
            let r = FuzzyRule::new(1, v.clone(), s.clone()).unwrap();
            let moved = FuzzyRule::new(1, v.iter().zip(&shift).map(|(a, b)| a + b).collect(), s).unwrap();
            let xs: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
            let a = firing_strength(&r, &x, -10.0).unwrap();
            let b = firing_strength(&moved, &xs, -10.0).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-12));
        }

        #[test]
        fn direct_matches_naive(
            centers in prop::collection::vec(prop::collection::vec(0.0f64..4.0, 2), 2..6),
            x in prop::collection::vec(0.0f64..4.0, 2),
        ) {
            let rules: Vec<FuzzyRule> = centers
                .iter()
                .enumerate()
                .map(|(i, c)| FuzzyRule::new((i % 2) as ClassId + 1, c.clone(), vec![1.5, 2.0]).unwrap())
                .collect();
            let rb = Rulebase::new(rules, 2, DEFAULT_Q, 2.0).unwrap();
            let d = classify_direct(&rb, &x).unwrap();
            let naive = naive_argmax(&rb, &x);
            let f = rb.firing_strengths(&x).unwrap();
            // allow disagreement only on numerical near-ties
            prop_assert!(d.rule_index == naive || (f[d.rule_index] - f[naive]).abs() < 1e-12);
        }

        #[test]
        fn confidence_entries_zero_or_above_threshold(x in -50.0f64..50.0) {
            let rb = Rulebase::new(
                vec![
                    FuzzyRule::new(1, vec![0.0], vec![3.0]).unwrap(),
                    FuzzyRule::new(2, vec![10.0], vec![3.0]).unwrap(),
                    FuzzyRule::new(3, vec![-10.0], vec![3.0]).unwrap(),
                ],
                3,
                DEFAULT_Q,
                2.0,
            ).unwrap();
            let cm = confidence_vector(&rb, &[x]).unwrap();
            for &v in cm.as_slice() {
                prop_assert!(v == 0.0 || (0.01..=1.0).contains(&v));
            }
        }
    }
}

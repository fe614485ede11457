//! Gradient-descent refinement of rule centers and spreads.
//!
//! For a training point of class `c`, let `R_c` be the best-firing rule of
//! that class and `R_not_c` the best-firing rule of any other class. The
//! per-sample error is `(1 - alpha_c + alpha_not_c)^2` and only those two
//! rules move.
//!
//! With `l_j = ln mu_j = -(x_j - v_j)^2 / sigma_j^2` and softmin weights
//! `w_j = mu_j^q / sum_i mu_i^q`, the firing strength satisfies
//! `d alpha / d l_j = alpha * w_j`, so
//!
//! ```text
//! d alpha / d v_j     = alpha * w_j * 2 (x_j - v_j) / sigma_j^2
//! d alpha / d sigma_j = alpha * w_j * 2 (x_j - v_j)^2 / sigma_j^3
//! ```
//!
//! Clauses whose log-membership hit the clamp contribute no gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{check_dim, log_membership, ClassId, FuzzyRule, Rulebase, LOG_MEMBERSHIP_FLOOR};
use crate::induction::{spread_floor, LabeledSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningConfig {
    /// Step size; `None` derives it from the training data's feature ranges.
    pub learning_rate: Option<f64>,
    pub max_epochs: usize,
    pub rel_tol: f64,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            learning_rate: None,
            max_epochs: 500,
            rel_tol: 1e-4,
        }
    }
}

impl TuningConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(lr) = self.learning_rate {
            if !(lr >= 0.0) || !lr.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "learning rate must be non-negative, got {lr}"
                )));
            }
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidParameter("max_epochs must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub learning_rate: f64,
    pub initial_error: f64,
    /// `E` after each epoch.
    pub epoch_errors: Vec<f64>,
    pub epochs_run: usize,
    /// Set when the last epoch raised `E` and its update was discarded.
    pub reverted_last_epoch: bool,
    pub final_error: f64,
    pub training_error_rate_before: f64,
    pub training_error_rate_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rivals {
    pub winner: usize,
    pub winner_firing: f64,
    pub rival: usize,
    pub rival_firing: f64,
}

impl Rivals {
    pub fn error_term(&self) -> f64 {
        let d = 1.0 - self.winner_firing + self.rival_firing;
        d * d
    }
}

fn pick_rivals(rb: &Rulebase, log_firings: &[f64], true_class: ClassId) -> Result<Rivals> {
    let mut winner: Option<usize> = None;
    let mut rival: Option<usize> = None;
    for (i, (rule, &a)) in rb.rules.iter().zip(log_firings).enumerate() {
        let slot = if rule.class == true_class {
            &mut winner
        } else {
            &mut rival
        };
        if slot.is_none_or(|j| a > log_firings[j]) {
            *slot = Some(i);
        }
    }
    let winner = winner.ok_or(Error::MissingClass {
        class: true_class,
        what: "rule",
    })?;
    let rival = rival.ok_or(Error::NoRivalClass)?;
    Ok(Rivals {
        winner,
        winner_firing: log_firings[winner].exp(),
        rival,
        rival_firing: log_firings[rival].exp(),
    })
}

pub fn select_rivals(rb: &Rulebase, x: &[f64], true_class: ClassId) -> Result<Rivals> {
    let logs = rb.log_firing_strengths(x)?;
    pick_rivals(rb, &logs, true_class)
}

/// `E = sum (1 - alpha_c + alpha_not_c)^2` over the data.
pub fn error_e(rb: &Rulebase, data: &[LabeledSample]) -> Result<f64> {
    data.iter()
        .map(|s| select_rivals(rb, &s.features, s.label).map(|r| r.error_term()))
        .sum()
}

/// Firing strength of a rule and its partial derivatives with respect to
/// every center and spread.
#[derive(Debug, Clone, PartialEq)]
pub struct FiringGradient {
    pub firing: f64,
    pub d_centers: Vec<f64>,
    pub d_spreads: Vec<f64>,
}

pub fn firing_gradient(rule: &FuzzyRule, x: &[f64], q: f64) -> Result<FiringGradient> {
    check_dim(rule.num_features(), x)?;
    let logs: Vec<f64> = x
        .iter()
        .zip(&rule.centers)
        .zip(&rule.spreads)
        .map(|((&xj, &v), &s)| log_membership(xj, v, s))
        .collect();
    let t_max = logs.iter().map(|l| q * l).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logs.iter().map(|l| (q * l - t_max).exp()).collect();
    let sum: f64 = e.iter().sum();
    let log_alpha = (t_max + sum.ln() - (logs.len() as f64).ln()) / q;
    let alpha = log_alpha.exp();

    let mut d_centers = Vec::with_capacity(logs.len());
    let mut d_spreads = Vec::with_capacity(logs.len());
    for j in 0..logs.len() {
        let (xj, v, s) = (x[j], rule.centers[j], rule.spreads[j]);
        let diff = xj - v;
        let raw = -(diff / s) * (diff / s);
        if raw < LOG_MEMBERSHIP_FLOOR {
            d_centers.push(0.0);
            d_spreads.push(0.0);
            continue;
        }
        let g = alpha * e[j] / sum;
        d_centers.push(g * 2.0 * diff / (s * s));
        d_spreads.push(g * 2.0 * diff * diff / (s * s * s));
    }
    Ok(FiringGradient {
        firing: alpha,
        d_centers,
        d_spreads,
    })
}

/// Gradient of one sample's error term with respect to the two rival rules.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGradient {
    pub rivals: Rivals,
    pub error_term: f64,
    pub winner_centers: Vec<f64>,
    pub winner_spreads: Vec<f64>,
    pub rival_centers: Vec<f64>,
    pub rival_spreads: Vec<f64>,
}

pub fn sample_gradient(rb: &Rulebase, sample: &LabeledSample) -> Result<SampleGradient> {
    let rivals = select_rivals(rb, &sample.features, sample.label)?;
    let gw = firing_gradient(&rb.rules[rivals.winner], &sample.features, rb.q)?;
    let gr = firing_gradient(&rb.rules[rivals.rival], &sample.features, rb.q)?;
    let residual = 1.0 - rivals.winner_firing + rivals.rival_firing;
    // dE/d alpha_c = -2 r, dE/d alpha_not_c = +2 r
    let scale = |v: Vec<f64>, k: f64| v.into_iter().map(|g| g * k).collect::<Vec<_>>();
    Ok(SampleGradient {
        rivals,
        error_term: residual * residual,
        winner_centers: scale(gw.d_centers, -2.0 * residual),
        winner_spreads: scale(gw.d_spreads, -2.0 * residual),
        rival_centers: scale(gr.d_centers, 2.0 * residual),
        rival_spreads: scale(gr.d_spreads, 2.0 * residual),
    })
}

/// One descent step on a single sample. Only the winner and rival rules are
/// touched; their spreads are re-floored afterwards.
pub fn gradient_step(
    rb: &mut Rulebase,
    sample: &LabeledSample,
    learning_rate: f64,
    spread_floor: &[f64],
) -> Result<Rivals> {
    let g = sample_gradient(rb, sample)?;
    let mut apply = |idx: usize, dv: &[f64], ds: &[f64]| {
        let rule = &mut rb.rules[idx];
        for (v, d) in rule.centers.iter_mut().zip(dv) {
            *v -= learning_rate * d;
        }
        for ((s, d), floor) in rule.spreads.iter_mut().zip(ds).zip(spread_floor) {
            *s = (*s - learning_rate * d).max(*floor);
        }
    };
    apply(g.rivals.winner, &g.winner_centers, &g.winner_spreads);
    apply(g.rivals.rival, &g.rival_centers, &g.rival_spreads);
    Ok(g.rivals)
}

/// `1e-5` times the mean squared per-feature range of the data.
pub fn default_learning_rate(data: &[LabeledSample]) -> f64 {
    let Some(first) = data.first() else {
        return 0.0;
    };
    let p = first.features.len();
    let mean_sq: f64 = (0..p)
        .map(|j| {
            let (lo, hi) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s.features[j]), hi.max(s.features[j]))
            });
            (hi - lo) * (hi - lo)
        })
        .sum::<f64>()
        / p as f64;
    1e-5 * mean_sq
}

pub fn training_error_rate(rb: &Rulebase, data: &[LabeledSample]) -> Result<f64> {
    let mut wrong = 0usize;
    for s in data {
        if rb.classify_direct(&s.features)?.class != s.label {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / data.len().max(1) as f64)
}

/// Epochs of per-sample steps in data order until the relative decrease of
/// `E` drops below `rel_tol` or `max_epochs` is reached. An epoch that
/// increases `E` is rolled back and ends tuning.
pub fn tune(
    rb: &Rulebase,
    data: &[LabeledSample],
    cfg: &TuningConfig,
) -> Result<(Rulebase, TuningReport)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("tuning data"));
    }
    let floor = spread_floor(data);
    let learning_rate = cfg.learning_rate.unwrap_or_else(|| default_learning_rate(data));
    let mut current = rb.clone();
    let initial_error = error_e(&current, data)?;
    let before = training_error_rate(&current, data)?;

    let mut prev = initial_error;
    let mut epoch_errors = Vec::new();
    let mut reverted = false;
    for _ in 0..cfg.max_epochs {
        let snapshot = current.clone();
        for s in data {
            gradient_step(&mut current, s, learning_rate, &floor)?;
        }
        let e = error_e(&current, data)?;
        epoch_errors.push(e);
        if e > prev {
            current = snapshot;
            reverted = true;
            break;
        }
        let rel = (prev - e) / prev.max(f64::EPSILON);
        prev = e;
        if rel < cfg.rel_tol {
            break;
        }
    }

    let report = TuningReport {
        learning_rate,
        initial_error,
        epochs_run: epoch_errors.len(),
        epoch_errors,
        reverted_last_epoch: reverted,
        final_error: prev,
        training_error_rate_before: before,
        training_error_rate_after: training_error_rate(&current, data)?,
    };
    Ok((current, report))
}

//! Recovering logistic-regression coefficients from score queries.

use std::ops::Range;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::nn::logit;
use crate::predictors::LogisticModel;
use crate::seed;

/// Probabilities inside this band keep the logit well conditioned.
pub const WELL_CONDITIONED: (f64, f64) = (0.2, 0.8);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    /// Starting probe; all zeros when absent.
    pub base: Option<Vec<f64>>,
    /// Largest finite-difference step; halved while a probe leaves the
    /// well-conditioned band.
    pub step: f64,
    /// Only query inputs with non-negative coordinates.
    pub positive_only: bool,
    /// One-hot feature group: only differences inside it are identifiable,
    /// so probes switch the active category instead of adding to it.
    pub one_hot: Option<Range<usize>>,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig { base: None, step: 1.0, positive_only: false, one_hot: None, resamples: 50, seed: 0 }
    }
}

fn in_band(p: f64) -> bool {
    (WELL_CONDITIONED.0..=WELL_CONDITIONED.1).contains(&p)
}

fn checked_logit(p: f64) -> Option<f64> {
    (p > 0.0 && p < 1.0 && p.is_finite()).then(|| logit(p))
}

/// Recover `(w, b)` of `x -> sigmoid(w·x + b)` from queries. Each weight is
/// a logit difference over a pair of probes differing in one feature.
/// Inside the one-hot group the recovered weights are relative to the base
/// category; pass the result through [`canonicalize`] before comparing.
pub fn recover_lr_coeffs(
    query: &dyn Fn(&[f64]) -> Result<f64>,
    features: usize,
    cfg: &RecoveryConfig,
) -> Result<LogisticModel> {
    if features == 0 || cfg.step <= 0.0 {
        return argument("recovery needs features and a positive step");
    }
    if let Some(g) = &cfg.one_hot {
        if g.start >= g.end || g.end > features {
            return argument(format!("one-hot group {g:?} outside {features} features"));
        }
    }
    let group = cfg.one_hot.clone().unwrap_or(0..0);
    let mut rng = seed::rng(cfg.seed);
    let mut base = cfg.base.clone().unwrap_or_else(|| vec![0.0; features]);
    if base.len() != features {
        return argument("base probe length differs from feature count");
    }
    if !group.is_empty() {
        base[group.clone()].iter_mut().for_each(|v| *v = 0.0);
        base[group.start] = 1.0;
    }

    // find a base probe with a usable, preferably well-conditioned, logit
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    for attempt in 0..=cfg.resamples {
        if attempt > 0 {
            for (j, v) in base.iter_mut().enumerate() {
                if group.contains(&j) {
                    continue;
                }
                let z: f64 = rng.sample(StandardNormal);
                *v = if cfg.positive_only { z.abs() } else { z };
            }
        }
        let p = query(&base)?;
        if let Some(l) = checked_logit(p) {
            let dist = (p - 0.5).abs();
            if best.as_ref().is_none_or(|b| dist < (b.2 - 0.5).abs()) {
                best = Some((base.clone(), l, p));
            }
            if in_band(p) {
                break;
            }
        }
    }
    let (base, base_logit, _) =
        best.ok_or_else(|| Error::Recovery("every base probe returned a saturated probability".into()))?;

    let mut w = vec![0.0; features];
    for j in 0..features {
        if group.contains(&j) {
            if j == group.start {
                continue;
            }
            let mut x = base.clone();
            x[group.start] = 0.0;
            x[j] = 1.0;
            let l = checked_logit(query(&x)?)
                .ok_or_else(|| Error::Recovery(format!("category {j} saturates the score")))?;
            w[j] = l - base_logit;
            continue;
        }
        w[j] = difference_quotient(query, &base, base_logit, j, cfg)?;
    }
    let b = base_logit - w.iter().zip(&base).map(|(a, x)| a * x).sum::<f64>();
    LogisticModel::from_coefficients(w, b)
}

/// Finite-difference slope along feature `j`, preferring the largest step
/// whose probe stays in the well-conditioned band.
fn difference_quotient(
    query: &dyn Fn(&[f64]) -> Result<f64>,
    base: &[f64],
    base_logit: f64,
    j: usize,
    cfg: &RecoveryConfig,
) -> Result<f64> {
    let mut fallback = None;
    let mut h = cfg.step;
    for _ in 0..12 {
        for dir in [1.0, -1.0] {
            let xj = base[j] + dir * h;
            if cfg.positive_only && xj < 0.0 {
                continue;
            }
            let mut x = base.to_vec();
            x[j] = xj;
            let p = query(&x)?;
            if let Some(l) = checked_logit(p) {
                let slope = (l - base_logit) / (dir * h);
                if in_band(p) {
                    return Ok(slope);
                }
                fallback.get_or_insert(slope);
            }
        }
        h /= 2.0;
    }
    fallback.ok_or_else(|| Error::Recovery(format!("feature {j} saturates the score at every step")))
}

/// Canonical representative of an LR whose one-hot group weights are only
/// identified up to a shared shift: group weights get zero mean and the
/// intercept absorbs the shift. Returns the weights followed by the intercept.
pub fn canonicalize(params: &[f64], one_hot: Range<usize>) -> Result<Vec<f64>> {
    if params.is_empty() || one_hot.end >= params.len() || one_hot.is_empty() {
        return argument("one-hot group must lie inside the weights");
    }
    let mut out = params.to_vec();
    let shift = out[one_hot.clone()].iter().sum::<f64>() / one_hot.len() as f64;
    out[one_hot].iter_mut().for_each(|v| *v -= shift);
    *out.last_mut().expect("intercept") += shift;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inverted {
    pub score: f64,
    /// The observation was outside the calibration range.
    pub clamped: bool,
}

/// Piecewise-linear inverse of a monotone non-decreasing calibration map
/// given as `(score, displayed)` pairs. Observations on a flat run map to
/// its midpoint.
pub fn invert_monotone_map(calibration: &[(f64, f64)], observed: f64) -> Result<Inverted> {
    if calibration.is_empty() {
        return argument("empty calibration");
    }
    if calibration.iter().any(|(s, p)| !s.is_finite() || !p.is_finite()) || !observed.is_finite() {
        return Err(Error::Domain("non-finite calibration or observation".into()));
    }
    if calibration.windows(2).any(|w| w[1].0 < w[0].0 || w[1].1 < w[0].1) {
        return argument("calibration is not monotone non-decreasing");
    }
    let (first, last) = (calibration[0], calibration[calibration.len() - 1]);
    if observed < first.1 {
        return Ok(Inverted { score: first.0, clamped: true });
    }
    if observed > last.1 {
        return Ok(Inverted { score: last.0, clamped: true });
    }
    let lo = calibration.iter().position(|c| c.1 >= observed).expect("observed within range");
    if calibration[lo].1 == observed {
        let hi = calibration.iter().rposition(|c| c.1 == observed).expect("match exists");
        return Ok(Inverted { score: (calibration[lo].0 + calibration[hi].0) / 2.0, clamped: false });
    }
    let (a, b) = (calibration[lo - 1], calibration[lo]);
    let t = (observed - a.1) / (b.1 - a.1);
    Ok(Inverted { score: a.0 + t * (b.0 - a.0), clamped: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::sigmoid;

    fn lr_query(w: Vec<f64>, b: f64) -> impl Fn(&[f64]) -> Result<f64> {
        move |x: &[f64]| Ok(sigmoid(w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b))
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        d / b.iter().map(|y| y * y).sum::<f64>().sqrt()
    }

    #[test]
    fn two_feature_hand_case() {
        let q = lr_query(vec![2.0, -1.0], 0.5);
        let cfg = RecoveryConfig { base: Some(vec![1.0, 1.0]), ..Default::default() };
        let m = recover_lr_coeffs(&q, 2, &cfg).unwrap();
        assert!((m.w[0] - 2.0).abs() < 1e-9 && (m.w[1] + 1.0).abs() < 1e-9 && (m.b - 0.5).abs() < 1e-9);
    }

    #[test]
    fn zero_weights_recover_the_intercept() {
        let q = lr_query(vec![0.0; 4], -0.3);
        let m = recover_lr_coeffs(&q, 4, &RecoveryConfig::default()).unwrap();
        assert!(m.w.iter().all(|&v| v.abs() < 1e-12));
        assert!((m.b + 0.3).abs() < 1e-12);
    }

    #[test]
    fn exact_queries_recover_random_models() {
        let mut rng = seed::rng(11);
        for trial in 0..20 {
            let w: Vec<f64> = (0..21).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
            let b = rng.sample::<f64, _>(StandardNormal);
            let cfg = RecoveryConfig { seed: trial, positive_only: trial % 2 == 0, ..Default::default() };
            let m = recover_lr_coeffs(&lr_query(w.clone(), b), 21, &cfg).unwrap();
            for (r, t) in m.w.iter().zip(&w) {
                assert!((r - t).abs() < 1e-9);
            }
            assert!((m.b - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rounded_queries_stay_within_one_percent() {
        let mut rng = seed::rng(12);
        for trial in 0..20 {
            let w: Vec<f64> = (0..21).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
            let b = 0.3 * rng.sample::<f64, _>(StandardNormal);
            let inner = lr_query(w.clone(), b);
            let q = move |x: &[f64]| Ok((inner(x)? * 1e4).round() / 1e4);
            let m = recover_lr_coeffs(&q, 21, &RecoveryConfig { seed: trial, ..Default::default() }).unwrap();
            let mut truth = w.clone();
            truth.push(b);
            assert!(rel(&m.params(), &truth) < 1e-2, "trial {trial}: {}", rel(&m.params(), &truth));
        }
    }

    #[test]
    fn one_hot_group_recovered_up_to_shift() {
        let mut w = vec![0.4, -0.2, 0.0, 0.0, 0.0];
        w[2..].copy_from_slice(&[0.7, -0.5, 0.1]);
        let q = lr_query(w.clone(), 0.2);
        let cfg = RecoveryConfig { one_hot: Some(2..5), positive_only: true, ..Default::default() };
        let m = recover_lr_coeffs(&q, 5, &cfg).unwrap();
        let mut truth = w.clone();
        truth.push(0.2);
        let a = canonicalize(&m.params(), 2..5).unwrap();
        let b = canonicalize(&truth, 2..5).unwrap();
        assert!(rel(&a, &b) < 1e-9);
    }

    #[test]
    fn saturated_oracle_is_an_error() {
        let q = |_: &[f64]| Ok(1.0);
        assert!(matches!(recover_lr_coeffs(&q, 3, &RecoveryConfig::default()), Err(Error::Recovery(_))));
    }

    #[test]
    fn inverse_of_identity_and_sigmoid() {
        let id: Vec<(f64, f64)> = (0..=10).map(|i| (i as f64 / 10.0, i as f64 / 10.0)).collect();
        assert!((invert_monotone_map(&id, 0.37).unwrap().score - 0.37).abs() < 1e-12);
        let sig: Vec<(f64, f64)> = (0..100).map(|i| {
            let s = -5.0 + 10.0 * i as f64 / 99.0;
            (s, sigmoid(s))
        }).collect();
        let r = invert_monotone_map(&sig, sigmoid(1.3)).unwrap();
        assert!((r.score - 1.3).abs() < 1e-3 && !r.clamped);
    }

    #[test]
    fn inverse_boundaries_and_flat_runs() {
        let cal = [(0.0, 0.1), (1.0, 0.5), (2.0, 0.5), (3.0, 0.9)];
        let below = invert_monotone_map(&cal, 0.05).unwrap();
        assert!(below.clamped && below.score == 0.0);
        assert_eq!(invert_monotone_map(&cal, 0.5).unwrap().score, 1.5);
        assert!(invert_monotone_map(&[(0.0, 0.5), (1.0, 0.4)], 0.45).is_err());
    }
}

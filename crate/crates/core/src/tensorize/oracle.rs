//! Black-box access wrappers.

use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::cohorts::{CANCER_TYPES, FEATURES, TYPE_OFFSET};
use crate::error::{argument, shape, Error, Result};
use crate::predictors::Scorer;

/// Round a probability to the nearest point of the uniform `b`-point grid
/// `{0, 1/(b-1), ..., 1}`; exact midpoints go to the lower point. Scores
/// outside `[0, 1]` are clamped.
pub fn discretize(score: f64, bins: usize) -> Result<f64> {
    if bins < 2 {
        return argument(format!("need at least 2 bins, got {bins}"));
    }
    if score.is_nan() {
        return Err(Error::Domain("cannot discretize NaN".into()));
    }
    let s = if (0.0..=1.0).contains(&score) {
        score
    } else {
        log::warn!("score {score} outside [0, 1] clamped before discretization");
        score.clamp(0.0, 1.0)
    };
    let steps = (bins - 1) as f64;
    let k = s * steps;
    let lower = k.floor();
    let idx = if k - lower > 0.5 { lower + 1.0 } else { lower };
    Ok(idx / steps)
}

/// Black-box access level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlackBox {
    /// Scores discretized to a `b`-point grid.
    Wbb(usize),
    /// Raw scores.
    Sbb,
}

impl BlackBox {
    pub fn apply(&self, score: f64) -> Result<f64> {
        match *self {
            BlackBox::Wbb(b) => discretize(score, b),
            BlackBox::Sbb => Ok(score),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BlackBox::Wbb(b) if b < 2 => argument(format!("b-WBB needs b >= 2, got {b}")),
            _ => Ok(()),
        }
    }
}

/// A deterministic score query on raw feature vectors.
pub trait Oracle: Send + Sync {
    fn query(&self, x: &[f64]) -> Result<f64>;
}

/// In-process oracle around a scorer.
pub struct ModelOracle<'a> {
    model: &'a dyn Scorer,
    access: BlackBox,
}

impl<'a> ModelOracle<'a> {
    pub fn new(model: &'a dyn Scorer, access: BlackBox) -> Result<Self> {
        access.validate()?;
        Ok(ModelOracle { model, access })
    }
}

impl Oracle for ModelOracle<'_> {
    fn query(&self, x: &[f64]) -> Result<f64> {
        self.access.apply(self.model.score(x)?)
    }
}

/// Counts queries and records the distinct values returned.
pub struct CountingOracle<O> {
    inner: O,
    count: AtomicU64,
    seen: Mutex<HashSet<u64>>,
}

impl<O: Oracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        CountingOracle { inner, count: AtomicU64::new(0), seen: Mutex::new(HashSet::new()) }
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn distinct_values(&self) -> usize {
        self.seen.lock().expect("poisoned").len()
    }
}

impl<O: Oracle> Oracle for CountingOracle<O> {
    fn query(&self, x: &[f64]) -> Result<f64> {
        self.count.fetch_add(1, Ordering::Relaxed);
        let v = self.inner.query(x)?;
        self.seen.lock().expect("poisoned").insert(v.to_bits());
        Ok(v)
    }
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn query(&self, x: &[f64]) -> Result<f64> {
        (**self).query(x)
    }
}

/// Oracle backed by the HTTP prediction endpoint; inputs must follow the
/// 21-feature cohort schema.
pub struct RemoteOracle {
    base: String,
    agent: ureq::Agent,
}

impl RemoteOracle {
    pub fn new(base: impl Into<String>) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(std::time::Duration::from_secs(30)).build();
        RemoteOracle { base: base.into().trim_end_matches('/').to_string(), agent }
    }
}

/// Query-string form of a schema row for the prediction endpoint.
pub fn predict_query(x: &[f64]) -> Result<String> {
    if x.len() != FEATURES {
        return shape(format!("remote queries need {FEATURES} features, got {}", x.len()));
    }
    let block = &x[TYPE_OFFSET..TYPE_OFFSET + CANCER_TYPES];
    let t = match block.iter().filter(|&&v| v == 1.0).count() {
        1 if block.iter().all(|&v| v == 0.0 || v == 1.0) => block.iter().position(|&v| v == 1.0).expect("one flag") + 1,
        _ => return Err(Error::Oracle("remote queries need a one-hot cancer type".into())),
    };
    Ok(format!(
        "tmb={}&psth={}&albumin={}&nlr={}&age={}&cancer_type={t}",
        x[0], x[1], x[2], x[3], x[4]
    ))
}

impl Oracle for RemoteOracle {
    fn query(&self, x: &[f64]) -> Result<f64> {
        let url = format!("{}/predict?{}", self.base, predict_query(x)?);
        let resp = self.agent.get(&url).call().map_err(|e| Error::Oracle(e.to_string()))?;
        let body = resp.into_string().map_err(|e| Error::Oracle(e.to_string()))?;
        let v: serde_json::Value = serde_json::from_str(&body).map_err(|e| Error::Oracle(e.to_string()))?;
        v["probability"]
            .as_f64()
            .ok_or_else(|| Error::Oracle(format!("response without probability: {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_grid() {
        assert_eq!(discretize(0.37, 2).unwrap(), 0.0);
        assert_eq!(discretize(0.81, 2).unwrap(), 1.0);
        assert_eq!(discretize(0.5, 2).unwrap(), 0.0);
    }

    #[test]
    fn six_point_grid() {
        assert!((discretize(0.37, 6).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(discretize(0.1, 6).unwrap(), 0.0);
        assert_eq!(discretize(1.0, 6).unwrap(), 1.0);
    }

    #[test]
    fn out_of_range_scores_are_clamped() {
        assert_eq!(discretize(1.3, 10).unwrap(), 1.0);
        assert_eq!(discretize(-0.2, 10).unwrap(), 0.0);
        assert!(discretize(0.5, 1).is_err());
    }

    #[test]
    fn grid_rounding_is_nearest() {
        for b in 2..12 {
            for k in 0..=1000 {
                let s = k as f64 / 1000.0;
                let d = discretize(s, b).unwrap();
                let best = (0..b)
                    .map(|i| (i as f64 / (b - 1) as f64 - s).abs())
                    .fold(f64::INFINITY, f64::min);
                assert!(((d - s).abs() - best).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn counting_oracle_tracks_values() {
        let m = |x: &[f64]| x[0];
        let o = CountingOracle::new(ModelOracle::new(&m, BlackBox::Wbb(2)).unwrap());
        for v in [0.1, 0.2, 0.9, 0.7] {
            o.query(&[v]).unwrap();
        }
        assert_eq!(o.count(), 4);
        assert_eq!(o.distinct_values(), 2);
    }

    #[test]
    fn query_string_needs_one_hot_type() {
        let mut x = vec![0.0; 21];
        x[0] = 5.5;
        x[7] = 1.0;
        assert!(predict_query(&x).unwrap().ends_with("cancer_type=3"));
        x[8] = 1.0;
        assert!(predict_query(&x).is_err());
    }
}

//! Elastic-net logistic regression fitted with SAGA on standardized inputs.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::DpRecord;
use crate::data::Dataset;
use crate::error::{shape, Error, Result};
use crate::nn::{bce_with_logit, sigmoid};
use crate::seed;
use crate::standardize::Standardizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeight {
    Balanced,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrHyper {
    pub l1_ratio: f64,
    pub c: f64,
    pub class_weight: ClassWeight,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LrHyper {
    fn default() -> Self {
        LrHyper { l1_ratio: 0.0, c: 1.0, class_weight: ClassWeight::Balanced, max_iter: 100, tol: 1e-8 }
    }
}

impl LrHyper {
    pub fn new(l1_ratio: f64, c: f64) -> Self {
        LrHyper { l1_ratio, c, ..LrHyper::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::Argument(format!("l1_ratio {} outside [0, 1]", self.l1_ratio)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Argument(format!("C = {} must be positive", self.c)));
        }
        Ok(())
    }
}

/// Logistic model acting on raw features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub hyper: LrHyper,
    pub standardizer: Standardizer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dp: Option<DpRecord>,
}

impl LogisticModel {
    pub fn new(w: Vec<f64>, b: f64, hyper: LrHyper, standardizer: Standardizer) -> Result<Self> {
        if standardizer.len() != w.len() {
            return shape(format!("{} weights but standardizer of {}", w.len(), standardizer.len()));
        }
        if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
            return Err(Error::Domain("non-finite logistic parameter".into()));
        }
        Ok(LogisticModel { w, b, hyper, standardizer, dp: None })
    }

    /// Model with the given raw coefficients and an identity standardizer.
    pub fn from_coefficients(w: Vec<f64>, b: f64) -> Result<Self> {
        let n = w.len();
        LogisticModel::new(w, b, LrHyper::default(), Standardizer::identity(n))
    }

    pub fn features(&self) -> usize {
        self.w.len()
    }

    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.w.len() {
            return shape(format!("expected {} features, got {}", self.w.len(), x.len()));
        }
        Ok(self.w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.b)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(x)?))
    }

    /// `(w_1, ..., w_p, b)`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.w.clone();
        p.push(self.b);
        p
    }

    /// Parameters acting on standardized inputs: `w̃_j = w_j σ_j`,
    /// `b̃ = b + Σ w_j μ_j`.
    pub fn standardized_params(&self) -> (Vec<f64>, f64) {
        let s = &self.standardizer;
        let w: Vec<f64> = self.w.iter().zip(&s.sigma).map(|(w, sg)| w * sg).collect();
        let b = self.b + self.w.iter().zip(&s.mu).map(|(w, m)| w * m).sum::<f64>();
        (w, b)
    }
}

pub(crate) fn check_two_classes(data: &Dataset, min_per_class: usize) -> Result<()> {
    let [neg, pos] = data.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::Training("training data contains a single class".into()));
    }
    if neg < min_per_class || pos < min_per_class {
        return Err(Error::Training(format!(
            "need at least {min_per_class} samples per class, got {neg} negative and {pos} positive"
        )));
    }
    Ok(())
}

pub(crate) fn sample_weights(labels: &[u8], cw: ClassWeight) -> Vec<f64> {
    match cw {
        ClassWeight::None => vec![1.0; labels.len()],
        ClassWeight::Balanced => {
            let n = labels.len() as f64;
            let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
            let wc = [n / (2.0 * (n - pos)), n / (2.0 * pos)];
            labels.iter().map(|&l| wc[l as usize]).collect()
        }
    }
}

/// Regularized objective on standardized data:
/// `(1/W) Σ s_i ℓ_i + (1/(C W)) [(1-ρ)/2 ||w||² + ρ ||w||₁]`, `W = Σ s_i`.
pub fn lr_objective(w: &[f64], b: f64, data: &Dataset, weights: &[f64], hyper: &LrHyper) -> f64 {
    let total: f64 = weights.iter().sum();
    let mut loss = 0.0;
    for (i, row) in data.rows().enumerate() {
        let z = w.iter().zip(row).map(|(a, x)| a * x).sum::<f64>() + b;
        loss += weights[i] * bce_with_logit(z, data.label(i) as f64);
    }
    let l2: f64 = w.iter().map(|v| v * v).sum();
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    let pen = (1.0 - hyper.l1_ratio) / 2.0 * l2 + hyper.l1_ratio * l1;
    loss / total + pen / (hyper.c * total)
}

/// Fit on already standardized data, returning `(w̃, b̃)`.
pub fn saga_fit(data: &Dataset, hyper: &LrHyper, seed_value: u64) -> Result<(Vec<f64>, f64)> {
    hyper.validate()?;
    check_two_classes(data, 1)?;
    let n = data.len();
    let p = data.features();
    let weights = sample_weights(data.labels(), hyper.class_weight);
    let total: f64 = weights.iter().sum();
    // per-sample scale so the objective is the plain mean of f_i
    let scale: Vec<f64> = weights.iter().map(|s| s * n as f64 / total).collect();
    let lam2 = (1.0 - hyper.l1_ratio) / (hyper.c * total);
    let lam1 = hyper.l1_ratio / (hyper.c * total);

    let l_max = data
        .rows()
        .zip(&scale)
        .map(|(r, s)| 0.25 * s * (r.iter().map(|v| v * v).sum::<f64>() + 1.0))
        .fold(0.0, f64::max);
    let step = 1.0 / (3.0 * l_max + lam2);

    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let margin = |w: &[f64], b: f64, i: usize| -> f64 {
        let row = data.row(i);
        scale[i] * (sigmoid(w.iter().zip(row).map(|(a, x)| a * x).sum::<f64>() + b) - data.label(i) as f64)
    };
    let mut table: Vec<f64> = (0..n).map(|i| margin(&w, b, i)).collect();
    let mut avg_w = vec![0.0; p];
    let mut avg_b = 0.0;
    for (i, &g) in table.iter().enumerate() {
        for (a, x) in avg_w.iter_mut().zip(data.row(i)) {
            *a += g * x / n as f64;
        }
        avg_b += g / n as f64;
    }

    let mut rng = seed::rng(seed_value);
    let mut order: Vec<usize> = (0..n).collect();
    let mut prev = lr_objective(&w, b, data, &weights, hyper);
    for _ in 0..hyper.max_iter {
        order.shuffle(&mut rng);
        for &i in &order {
            let g_new = margin(&w, b, i);
            let diff = g_new - table[i];
            let row = data.row(i);
            for j in 0..p {
                let v = w[j] - step * (diff * row[j] + avg_w[j]);
                let shrunk = v.signum() * (v.abs() - step * lam1).max(0.0);
                w[j] = shrunk / (1.0 + step * lam2);
            }
            b -= step * (diff + avg_b);
            for (a, x) in avg_w.iter_mut().zip(row) {
                *a += diff * x / n as f64;
            }
            avg_b += diff / n as f64;
            table[i] = g_new;
        }
        let obj = lr_objective(&w, b, data, &weights, hyper);
        if !obj.is_finite() {
            return Err(Error::Training("logistic objective diverged".into()));
        }
        let done = (prev - obj).abs() < hyper.tol;
        prev = obj;
        if done {
            break;
        }
    }
    Ok((w, b))
}

/// Standardize, fit, and rescale to raw-feature parameters.
pub fn lr_train(data: &Dataset, hyper: &LrHyper, seed_value: u64) -> Result<LogisticModel> {
    check_two_classes(data, 2)?;
    if data.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("training data contains a non-finite value".into()));
    }
    let s = Standardizer::fit(data);
    let z = s.transform_dataset(data);
    let (w_std, b_std) = saga_fit(&z, hyper, seed_value)?;
    let (w, b) = s.rescale_linear(&w_std, b_std);
    LogisticModel::new(w, b, *hyper, s)
}

use serde::{Deserialize, Serialize};

use super::logistic::check_two_classes;
use super::DpRecord;
use crate::data::Dataset;
use crate::error::{shape, Error, Result};
use crate::nn::{self, FitConfig, Mlp};
use crate::seed;
use crate::standardize::Standardizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpHyper {
    pub hidden: Vec<usize>,
    pub batch: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
}

impl Default for MlpHyper {
    fn default() -> Self {
        MlpHyper { hidden: vec![19, 19], batch: 32, lr: 1e-3, weight_decay: 1e-5, epochs: 100 }
    }
}

impl MlpHyper {
    pub fn sizes(&self, inputs: usize) -> Vec<usize> {
        let mut s = vec![inputs];
        s.extend_from_slice(&self.hidden);
        s.push(1);
        s
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig { epochs: self.epochs, batch: self.batch, lr: self.lr, weight_decay: self.weight_decay }
    }
}

/// Network trained on standardized inputs; callers always pass raw features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub net: Mlp,
    pub standardizer: Standardizer,
    pub hyper: MlpHyper,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dp: Option<DpRecord>,
}

impl MlpModel {
    pub fn new(net: Mlp, standardizer: Standardizer, hyper: MlpHyper) -> Result<Self> {
        if net.outputs() != 1 {
            return shape("a classifier network needs exactly one output");
        }
        if standardizer.len() != net.inputs() {
            return shape(format!("standardizer has {} features, network {}", standardizer.len(), net.inputs()));
        }
        Ok(MlpModel { net, standardizer, hyper, dp: None })
    }

    /// Network whose raw-scale parameters are `params`.
    pub fn from_raw_params(sizes: &[usize], params: Vec<f64>, hyper: MlpHyper) -> Result<Self> {
        let net = Mlp::from_params(sizes, params)?;
        let s = Standardizer::identity(net.inputs());
        MlpModel::new(net, s, hyper)
    }

    pub fn features(&self) -> usize {
        self.net.inputs()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.net.inputs() {
            return shape(format!("expected {} features, got {}", self.net.inputs(), x.len()));
        }
        Ok(self.net.predict(&self.standardizer.transform(x))[0])
    }

    /// Flattened parameters with the standardization folded into the first
    /// layer: `W' = W / σ` column-wise, `b' = b - W (μ / σ)`.
    pub fn raw_params(&self) -> Vec<f64> {
        if self.standardizer.is_identity() {
            return self.net.params().to_vec();
        }
        let mut net = self.net.clone();
        let n_in = net.inputs();
        let s = &self.standardizer;
        let (w, b) = net.layer_mut(0);
        for (o, bo) in b.iter_mut().enumerate() {
            for j in 0..n_in {
                let wij = w[o * n_in + j];
                *bo -= wij * s.mu[j] / s.sigma[j];
                w[o * n_in + j] = wij / s.sigma[j];
            }
        }
        net.params().to_vec()
    }
}

pub fn mlp_train(data: &Dataset, hyper: &MlpHyper, seed_value: u64) -> Result<MlpModel> {
    check_two_classes(data, 2)?;
    if data.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("training data contains a non-finite value".into()));
    }
    let s = Standardizer::fit(data);
    let z = s.transform_dataset(data);
    let mut rng = seed::rng(seed_value);
    let mut net = Mlp::init(&hyper.sizes(data.features()), &mut rng)?;
    let targets: Vec<f64> = data.labels().iter().map(|&l| l as f64).collect();
    nn::fit(&mut net, z.values(), &targets, &hyper.fit_config(), &mut rng)?;
    MlpModel::new(net, s, hyper.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::metrics::balanced_accuracy;
    use rand::Rng;

    fn xor(n: usize, seed_value: u64) -> Dataset {
        let mut rng = seed::rng(seed_value);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            rows.push(vec![a * 3.0 + 10.0, b]);
            y.push(((a > 0.0) != (b > 0.0)) as u8);
        }
        Dataset::from_rows(&rows, y).unwrap()
    }

    #[test]
    fn fits_xor() {
        let d = xor(400, 1);
        let h = MlpHyper { epochs: 300, lr: 1e-2, ..MlpHyper::default() };
        let m = mlp_train(&d, &h, 2).unwrap();
        let scores: Vec<f64> = d.rows().map(|r| m.predict(r).unwrap()).collect();
        assert!(balanced_accuracy(&scores, d.labels()).unwrap().0 >= 0.95);
    }

    #[test]
    fn zero_epochs_leaves_initialization() {
        let d = xor(100, 3);
        let h = MlpHyper { epochs: 0, ..MlpHyper::default() };
        let m = mlp_train(&d, &h, 5).unwrap();
        let init = Mlp::init(&h.sizes(2), &mut seed::rng(5)).unwrap();
        assert_eq!(m.net, init);
        for r in d.rows() {
            assert!((m.predict(r).unwrap() - 0.5).abs() < 0.25);
        }
    }

    #[test]
    fn training_is_bitwise_reproducible() {
        let d = xor(120, 4);
        let h = MlpHyper { epochs: 5, ..MlpHyper::default() };
        assert_eq!(mlp_train(&d, &h, 8).unwrap(), mlp_train(&d, &h, 8).unwrap());
    }

    #[test]
    fn folded_parameters_reproduce_predictions() {
        let d = xor(120, 6);
        let h = MlpHyper { epochs: 3, ..MlpHyper::default() };
        let m = mlp_train(&d, &h, 1).unwrap();
        let raw = MlpModel::from_raw_params(&h.sizes(2), m.raw_params(), h.clone()).unwrap();
        for r in d.rows() {
            assert!((raw.predict(r).unwrap() - m.predict(r).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn default_architecture_has_818_parameters() {
        let h = MlpHyper::default();
        assert_eq!(nn::param_count(&h.sizes(21)), 818);
    }
}

//! Differentially private SGD for the MLP: per-sample clipping and
//! Gaussian noise on the summed batch gradient, followed by Adam.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{argument, Error, Result};
use crate::nn::{Adam, Mlp};
use crate::predictors::logistic::check_two_classes;
use crate::predictors::{DpRecord, MlpHyper, MlpModel};
use crate::seed;
use crate::standardize::Standardizer;

/// Noise multipliers used in experiments.
pub const SIGMA_GRID: [f64; 4] = [20.0, 5.0, 1.0, 0.0];

/// Reference points `(σ, ε)` of the privacy-accounting correspondence used
/// for reporting.
const SIGMA_EPSILON: [(f64, f64); 3] = [(1.0, 10.0), (5.0, 1.0), (20.0, 0.2)];

/// Approximate budget for a noise multiplier: exact at the reference
/// points, log-log interpolation between them, end segments extended
/// outside. `None` means unbounded (σ = 0).
pub fn approx_epsilon(sigma: f64) -> Option<f64> {
    if sigma <= 0.0 {
        return None;
    }
    let seg = if sigma <= SIGMA_EPSILON[1].0 { 0 } else { 1 };
    let ((s0, e0), (s1, e1)) = (SIGMA_EPSILON[seg], SIGMA_EPSILON[seg + 1]);
    let t = (sigma.ln() - s0.ln()) / (s1.ln() - s0.ln());
    Some((e0.ln() + t * (e1.ln() - e0.ln())).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpSgdConfig {
    pub sigma: f64,
    pub clip: f64,
    pub delta: f64,
    pub epochs: usize,
    pub batch: usize,
    pub hyper: MlpHyper,
}

impl DpSgdConfig {
    pub fn new(sigma: f64) -> Self {
        DpSgdConfig { sigma, clip: 1.0, delta: 1e-4, epochs: 50, batch: 32, hyper: MlpHyper::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma.is_nan() || self.sigma < 0.0 {
            return argument(format!("noise multiplier must be non-negative, got {}", self.sigma));
        }
        if !(self.clip > 0.0) {
            return argument("clip norm must be positive");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return argument(format!("delta {} outside (0, 1)", self.delta));
        }
        if self.batch == 0 || self.epochs == 0 {
            return argument("batch size and epochs must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpSgdReport {
    pub sigma: f64,
    pub steps: usize,
    pub sampling_rate: f64,
    pub delta: f64,
    pub epsilon: Option<f64>,
}

/// Scale `g` to norm at most `clip`; returns the norm before clipping.
pub fn clip_gradient(g: &mut [f64], clip: f64) -> f64 {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > clip {
        let f = clip / norm;
        g.iter_mut().for_each(|v| *v *= f);
    }
    norm
}

pub fn dp_sgd_train(data: &Dataset, cfg: &DpSgdConfig, seed_value: u64) -> Result<(MlpModel, DpSgdReport)> {
    cfg.validate()?;
    check_two_classes(data, 2)?;
    if data.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("training data contains a non-finite value".into()));
    }
    let s = Standardizer::fit(data);
    let z = s.transform_dataset(data);
    let mut rng = seed::rng(seed_value);
    let mut net = Mlp::init(&cfg.hyper.sizes(data.features()), &mut rng)?;
    let np = net.params().len();
    let mut opt = Adam::new(np, cfg.hyper.lr, cfg.hyper.weight_decay);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut sum = vec![0.0; np];
    let mut g = vec![0.0; np];
    let mut steps = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch) {
            sum.iter_mut().for_each(|v| *v = 0.0);
            for &i in chunk {
                g.iter_mut().for_each(|v| *v = 0.0);
                net.accumulate_grad(z.row(i), &[z.label(i) as f64], 1.0, &mut g);
                clip_gradient(&mut g, cfg.clip);
                sum.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            if cfg.sigma > 0.0 {
                for v in sum.iter_mut() {
                    *v += cfg.sigma * cfg.clip * rng.sample::<f64, _>(StandardNormal);
                }
            }
            let scale = 1.0 / cfg.batch as f64;
            sum.iter_mut().for_each(|v| *v *= scale);
            opt.step(net.params_mut(), &sum);
            steps += 1;
        }
    }
    if net.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::Training("DP-SGD diverged".into()));
    }
    let report = DpSgdReport {
        sigma: cfg.sigma,
        steps,
        sampling_rate: cfg.batch as f64 / data.len() as f64,
        delta: cfg.delta,
        epsilon: approx_epsilon(cfg.sigma),
    };
    let mut model = MlpModel::new(net, s, cfg.hyper.clone())?;
    model.dp = Some(DpRecord { epsilon: report.epsilon, delta: Some(cfg.delta), sigma: Some(cfg.sigma), clip: Some(cfg.clip) });
    Ok((model, report))
}

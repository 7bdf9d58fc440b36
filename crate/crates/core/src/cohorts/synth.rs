//! Parametric synthetic cohorts with a latent logistic response model.

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Cohort, CANCER_TYPES, FEATURES, TYPE_OFFSET};
use crate::data::Dataset;
use crate::error::{argument, Result};
use crate::seed;

/// Location and scale of a normal distribution (of the log for log-normal
/// features).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Continuous {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub name: String,
    pub size: usize,
    pub response_rate: f64,
    /// Log-normal, mutations/Mb.
    pub tmb: Continuous,
    pub psth: f64,
    /// Normal, g/dL.
    pub albumin: Continuous,
    /// Log-normal ratio.
    pub nlr: Continuous,
    /// Normal, years.
    pub age: Continuous,
    pub type_mix: Vec<f64>,
    /// Relative perturbation of the latent coefficients and feature
    /// distributions; 0 keeps the cohort identically distributed to the base.
    pub drift: f64,
    /// Cancer types (0-based) whose patients never respond.
    #[serde(default)]
    pub nonresponder_types: Vec<usize>,
}

impl CohortSpec {
    pub fn base(name: impl Into<String>, size: usize) -> CohortSpec {
        CohortSpec {
            name: name.into(),
            size,
            response_rate: 0.3,
            tmb: Continuous { mean: 1.6, sd: 0.9 },
            psth: 0.55,
            albumin: Continuous { mean: 3.8, sd: 0.45 },
            nlr: Continuous { mean: 1.3, sd: 0.6 },
            age: Continuous { mean: 62.0, sd: 11.0 },
            type_mix: vec![
                0.22, 0.14, 0.08, 0.07, 0.07, 0.06, 0.06, 0.05, 0.05, 0.04, 0.04, 0.03, 0.03, 0.02, 0.02, 0.02,
            ],
            drift: 0.3,
            nonresponder_types: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 10 {
            return argument(format!("cohort {} has size {} (< 10)", self.name, self.size));
        }
        if !(self.response_rate > 0.0 && self.response_rate < 1.0) {
            return argument(format!("response rate {} outside (0, 1)", self.response_rate));
        }
        if self.type_mix.len() != CANCER_TYPES || self.type_mix.iter().any(|p| !(*p >= 0.0)) {
            return argument(format!("type mix needs {CANCER_TYPES} non-negative weights"));
        }
        if self.type_mix.iter().sum::<f64>() <= 0.0 {
            return argument("type mix has zero mass");
        }
        if !(0.0..=1.0).contains(&self.psth) {
            return argument("PSTH probability outside [0, 1]");
        }
        for c in [self.tmb, self.albumin, self.nlr, self.age] {
            if !(c.sd >= 0.0 && c.mean.is_finite() && c.sd.is_finite()) {
                return argument("invalid continuous feature parameters");
            }
        }
        if !(self.drift >= 0.0 && self.drift.is_finite()) {
            return argument("drift must be non-negative");
        }
        if let Some(t) = self.nonresponder_types.iter().find(|&&t| t >= CANCER_TYPES) {
            return argument(format!("cancer type {t} out of range"));
        }
        Ok(())
    }
}

/// Latent response model: logit = coefficients · x (raw features) plus an
/// implicit intercept fixed by the response rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentModel {
    pub coefficients: Vec<f64>,
}

impl Default for LatentModel {
    fn default() -> Self {
        let mut c = vec![0.07, -0.6, 0.9, -0.15, -0.012];
        c.extend_from_slice(&[
            0.9, 0.3, 0.0, -0.2, 0.5, -0.4, 0.2, -0.6, 0.1, -0.3, 0.4, -0.8, 0.0, -0.5, 0.6, -1.2,
        ]);
        LatentModel { coefficients: c }
    }
}

/// Named spec lists: `desk` (three cohorts) and `clinical-sizes` (six
/// cohorts with sizes 964, 515, 453, 104, 198, 35; also accepted as
/// `paper-sizes`).
pub fn preset(name: &str) -> Result<Vec<CohortSpec>> {
    let sizes: &[usize] = match name {
        "desk" => &[400, 300, 200],
        "clinical-sizes" | "paper-sizes" => &[964, 515, 453, 104, 198, 35],
        other => return argument(format!("unknown cohort preset {other:?}")),
    };
    Ok(sizes
        .iter()
        .enumerate()
        .map(|(m, &n)| CohortSpec::base(format!("cohort_{}", m + 1), n))
        .collect())
}

pub fn generate_cohorts(specs: &[CohortSpec], seed_value: u64) -> Result<Vec<Cohort>> {
    generate_with(specs, &LatentModel::default(), seed_value)
}

pub fn generate_with(specs: &[CohortSpec], latent: &LatentModel, seed_value: u64) -> Result<Vec<Cohort>> {
    if latent.coefficients.len() != FEATURES {
        return argument(format!("latent model needs {FEATURES} coefficients"));
    }
    specs
        .iter()
        .enumerate()
        .map(|(m, spec)| {
            spec.validate()?;
            generate_one(spec, latent, seed_value, m as u64, "sample")
        })
        .collect()
}

/// Fresh samples from the same drifted distributions as
/// [`generate_with`], of `size` rows per cohort.
pub fn generate_holdout(specs: &[CohortSpec], latent: &LatentModel, seed_value: u64, size: usize) -> Result<Vec<Cohort>> {
    if latent.coefficients.len() != FEATURES {
        return argument(format!("latent model needs {FEATURES} coefficients"));
    }
    specs
        .iter()
        .enumerate()
        .map(|(m, spec)| {
            let spec = CohortSpec { size, name: format!("{}_holdout", spec.name), ..spec.clone() };
            spec.validate()?;
            generate_one(&spec, latent, seed_value, m as u64, "holdout")
        })
        .collect()
}

fn generate_one(spec: &CohortSpec, latent: &LatentModel, seed_value: u64, m: u64, stream: &str) -> Result<Cohort> {
    let d = spec.drift;
    let mut drift_rng = seed::rng(seed::derive(seed_value, "drift", &[m]));
    let mut g = || -> f64 { StandardNormal.sample(&mut drift_rng) };

    let coef: Vec<f64> = latent.coefficients.iter().map(|b| b * (1.0 + d * g())).collect();
    let tmb = Continuous { mean: spec.tmb.mean + d * 0.5 * g(), sd: spec.tmb.sd };
    let albumin = Continuous { mean: spec.albumin.mean + d * 0.3 * g(), sd: spec.albumin.sd };
    let nlr = Continuous { mean: spec.nlr.mean + d * 0.3 * g(), sd: spec.nlr.sd };
    let age = Continuous { mean: spec.age.mean + d * 5.0 * g(), sd: spec.age.sd };
    let psth_logit = (spec.psth.clamp(1e-6, 1.0 - 1e-6) / (1.0 - spec.psth.clamp(1e-6, 1.0 - 1e-6))).ln() + d * g();
    let psth = 1.0 / (1.0 + (-psth_logit).exp());
    let mix: Vec<f64> = spec.type_mix.iter().map(|p| p * (d * g()).exp()).collect();
    let mix_total: f64 = mix.iter().sum();
    let cum: Vec<f64> = mix
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p / mix_total;
            Some(*acc)
        })
        .collect();

    let mut rng = seed::rng(seed::derive(seed_value, stream, &[m]));
    let normal = |c: Continuous| Normal::new(c.mean, c.sd).expect("validated");
    let (n_tmb, n_alb, n_nlr, n_age) = (normal(tmb), normal(albumin), normal(nlr), normal(age));
    let mut x = Vec::with_capacity(spec.size * FEATURES);
    let mut z = Vec::with_capacity(spec.size);
    for _ in 0..spec.size {
        let mut row = [0.0; FEATURES];
        row[0] = round4(n_tmb.sample(&mut rng).exp());
        row[1] = rng.gen_bool(psth) as u8 as f64;
        row[2] = round4(n_alb.sample(&mut rng).max(1.0));
        row[3] = round4(n_nlr.sample(&mut rng).exp().max(0.05));
        row[4] = round4(n_age.sample(&mut rng).clamp(18.0, 100.0));
        let u: f64 = rng.gen();
        let t = cum.iter().position(|&c| u < c).unwrap_or(CANCER_TYPES - 1);
        row[TYPE_OFFSET + t] = 1.0;
        z.push(coef.iter().zip(&row).map(|(a, b)| a * b).sum::<f64>());
        x.extend_from_slice(&row);
    }

    // Exact responder count: weighted sampling without replacement with odds
    // weights (Efraimidis-Spirakis keys), excluding non-responder types.
    let eligible: Vec<bool> = (0..spec.size)
        .map(|i| {
            let t = super::row_type(&x[i * FEATURES..(i + 1) * FEATURES]);
            !spec.nonresponder_types.contains(&t)
        })
        .collect();
    let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut keys: Vec<(f64, usize)> = (0..spec.size)
        .filter(|&i| eligible[i])
        .map(|i| {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            (u.ln() / (z[i] - zmax).exp(), i)
        })
        .collect();
    keys.sort_by(|a, b| b.0.total_cmp(&a.0));
    let target = ((spec.response_rate * spec.size as f64).round() as usize).min(keys.len());
    let mut y = vec![0u8; spec.size];
    for &(_, i) in keys.iter().take(target) {
        y[i] = 1;
    }
    Cohort::new(spec.name.clone(), Dataset::new(FEATURES, x, y)?)
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_have_listed_sizes() {
        let sizes: Vec<usize> = preset("clinical-sizes").unwrap().iter().map(|s| s.size).collect();
        assert_eq!(sizes, vec![964, 515, 453, 104, 198, 35]);
        assert_eq!(preset("paper-sizes").unwrap(), preset("clinical-sizes").unwrap());
        assert!(preset("nope").is_err());
    }

    #[test]
    fn response_rate_is_on_target() {
        let cohorts = generate_cohorts(&preset("clinical-sizes").unwrap(), 11).unwrap();
        for c in &cohorts {
            assert_eq!(c.len(), c.data.len());
            if c.len() >= 200 {
                assert!((c.response_rate() - 0.3).abs() <= 0.05);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let specs = preset("desk").unwrap();
        assert_eq!(generate_cohorts(&specs, 4).unwrap(), generate_cohorts(&specs, 4).unwrap());
        assert_ne!(generate_cohorts(&specs, 4).unwrap(), generate_cohorts(&specs, 5).unwrap());
    }

    #[test]
    fn nonresponder_types_never_respond() {
        let mut spec = CohortSpec::base("x", 500);
        spec.nonresponder_types = vec![0, 3];
        let c = &generate_cohorts(&[spec], 2).unwrap()[0];
        for i in 0..c.len() {
            if [0, 3].contains(&c.cancer_type(i)) {
                assert_eq!(c.data.label(i), 0);
            }
        }
        assert!(c.type_counts()[0] > 0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = CohortSpec::base("x", 5);
        assert!(s.validate().is_err());
        s.size = 50;
        s.response_rate = 1.0;
        assert!(s.validate().is_err());
        s.response_rate = 0.3;
        s.type_mix.pop();
        assert!(s.validate().is_err());
    }
}

use serde::{Deserialize, Serialize};

use super::{lr_train, mlp_train, LogisticModel, LrHyper, MlpHyper, MlpModel, Model};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;

const FOLD_RETRIES: u64 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "lowercase")]
pub enum Arch {
    Lr(LrHyper),
    Mlp(MlpHyper),
}

impl Arch {
    pub fn train(&self, data: &Dataset, seed_value: u64) -> Result<Model> {
        match self {
            Arch::Lr(h) => Ok(Model::Lr(lr_train(data, h, seed_value)?)),
            Arch::Mlp(h) => Ok(Model::Mlp(mlp_train(data, h, seed_value)?)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Arch::Lr(_) => "lr",
            Arch::Mlp(_) => "mlp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Mechanism {
    /// One fit on a stratified 80% split.
    Vanilla,
    /// `j` repetitions of `k`-fold partitioning; all `j * k` fold models
    /// are averaged in raw parameter space.
    Averaged { j: usize, k: usize },
}

impl Mechanism {
    pub fn name(&self) -> String {
        match self {
            Mechanism::Vanilla => "vanilla".into(),
            Mechanism::Averaged { j, k } => format!("averaged-j{j}-k{k}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Mechanism::Averaged { j, k } = *self {
            if j < 1 || k < 2 {
                return Err(Error::Argument(format!("averaged mechanism needs J >= 1 and K >= 2, got J={j} K={k}")));
            }
        }
        Ok(())
    }
}

pub const VANILLA_TRAIN_FRACTION: f64 = 0.8;

pub fn train_mechanism(arch: &Arch, data: &Dataset, mech: &Mechanism, seed_value: u64) -> Result<Model> {
    mech.validate()?;
    if data.is_empty() {
        return Err(Error::Argument("empty training union".into()));
    }
    match *mech {
        Mechanism::Vanilla => {
            let (train, _) = data.stratified_split(VANILLA_TRAIN_FRACTION, seed::derive(seed_value, "split", &[]));
            arch.train(&data.subset(&train), seed::derive(seed_value, "fit", &[]))
        }
        Mechanism::Averaged { j, k } => {
            let mut models = Vec::with_capacity(j * k);
            for rep in 0..j {
                let folds = valid_folds(data, k, seed_value, rep as u64)?;
                for f in 0..k {
                    let idx: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != f).collect();
                    let fit_seed = seed::derive(seed_value, "fit", &[rep as u64, f as u64]);
                    models.push(arch.train(&data.subset(&idx), fit_seed)?);
                }
            }
            average(arch, &models, data)
        }
    }
}

/// Fold assignment whose every training part has at least two samples per
/// class; the partition is redrawn a bounded number of times.
fn valid_folds(data: &Dataset, k: usize, seed_value: u64, rep: u64) -> Result<Vec<usize>> {
    for attempt in 0..FOLD_RETRIES {
        let folds = data.stratified_folds(k, seed::derive(seed_value, "folds", &[rep, attempt]));
        let ok = (0..k).all(|f| {
            let mut c = [0usize; 2];
            for (i, &fi) in folds.iter().enumerate() {
                if fi != f {
                    c[data.label(i) as usize] += 1;
                }
            }
            c[0] >= 2 && c[1] >= 2
        });
        if ok {
            return Ok(folds);
        }
    }
    Err(Error::Training(format!("no valid {k}-fold partition after {FOLD_RETRIES} attempts")))
}

/// Arithmetic mean of raw-scale parameters.
pub fn average(arch: &Arch, models: &[Model], data: &Dataset) -> Result<Model> {
    let n = models.len() as f64;
    let dim = models[0].params().len();
    let mut mean = vec![0.0; dim];
    for m in models {
        for (a, p) in mean.iter_mut().zip(m.params()) {
            *a += p / n;
        }
    }
    match arch {
        Arch::Lr(h) => {
            let b = mean.pop().expect("intercept");
            let s = crate::standardize::Standardizer::fit(data);
            Ok(Model::Lr(LogisticModel::new(mean, b, *h, s)?))
        }
        Arch::Mlp(h) => {
            let sizes = h.sizes(data.features());
            Ok(Model::Mlp(MlpModel::from_raw_params(&sizes, mean, h.clone())?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cohort(n: usize, seed_value: u64) -> Dataset {
        let mut rng = seed::rng(seed_value);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(0.0..10.0), rng.gen_range(-1.0..1.0)]).collect();
        let y = rows
            .iter()
            .map(|r| (0.5 * r[0] - 2.5 + r[1] + rng.gen_range(-1.5..1.5) > 0.0) as u8)
            .collect();
        Dataset::from_rows(&rows, y).unwrap()
    }

    #[test]
    fn averaged_equals_mean_of_fold_models() {
        let d = cohort(60, 1);
        let arch = Arch::Lr(LrHyper::new(0.5, 1.0));
        let out = train_mechanism(&arch, &d, &Mechanism::Averaged { j: 1, k: 2 }, 7).unwrap();
        let folds = valid_folds(&d, 2, 7, 0).unwrap();
        let mut params = Vec::new();
        for f in 0..2 {
            let idx: Vec<usize> = (0..d.len()).filter(|&i| folds[i] != f).collect();
            params.push(arch.train(&d.subset(&idx), seed::derive(7, "fit", &[0, f as u64])).unwrap().params());
        }
        let expect: Vec<f64> = (0..3).map(|i| params[0][i] / 2.0 + params[1][i] / 2.0).collect();
        assert_eq!(out.params(), expect);
    }

    #[test]
    fn vanilla_is_reproducible() {
        let d = cohort(80, 2);
        let arch = Arch::Lr(LrHyper::default());
        let a = train_mechanism(&arch, &d, &Mechanism::Vanilla, 3).unwrap();
        let b = train_mechanism(&arch, &d, &Mechanism::Vanilla, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn averaging_reduces_parameter_variance() {
        let d = cohort(150, 5);
        let arch = Arch::Lr(LrHyper::new(0.0, 1.0));
        let spread = |mech: Mechanism| {
            let ps: Vec<Vec<f64>> = (0..20).map(|r| train_mechanism(&arch, &d, &mech, 100 + r).unwrap().params()).collect();
            (0..3)
                .map(|i| {
                    let m = ps.iter().map(|p| p[i]).sum::<f64>() / 20.0;
                    ps.iter().map(|p| (p[i] - m).powi(2)).sum::<f64>() / 19.0
                })
                .sum::<f64>()
        };
        assert!(spread(Mechanism::Averaged { j: 5, k: 3 }) < spread(Mechanism::Vanilla));
    }

    #[test]
    fn invalid_mechanisms_are_rejected() {
        let d = cohort(30, 1);
        let arch = Arch::Lr(LrHyper::default());
        assert!(train_mechanism(&arch, &d, &Mechanism::Averaged { j: 0, k: 3 }, 1).is_err());
        assert!(train_mechanism(&arch, &d, &Mechanism::Averaged { j: 1, k: 1 }, 1).is_err());
    }

    #[test]
    fn averaged_mlp_predicts_with_identity_standardizer() {
        let d = cohort(60, 9);
        let h = MlpHyper { epochs: 2, ..MlpHyper::default() };
        let m = train_mechanism(&Arch::Mlp(h), &d, &Mechanism::Averaged { j: 1, k: 2 }, 4).unwrap();
        assert_eq!(m.params().len(), crate::nn::param_count(&[2, 19, 19, 1]));
        if let Model::Mlp(mm) = &m {
            assert!(mm.standardizer.is_identity());
        }
    }
}

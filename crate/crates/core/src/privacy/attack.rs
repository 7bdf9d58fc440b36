//! Multi-label membership adversary and its cross-validated evaluation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::AttackCorpus;
use crate::data::Dataset;
use crate::error::{argument, shape, Error, Result};
use crate::nn::{self, FitConfig, Mlp};
use crate::seed;
use crate::standardize::Standardizer;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdversaryConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub weight_decay: f64,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        AdversaryConfig { hidden: vec![32, 16, 8], epochs: 100, batch: 32, lr: 3e-3, weight_decay: 0.0 }
    }
}

/// Trained adversary. Inputs are standardized with training statistics;
/// labels that were constant in training are predicted as that constant.
#[derive(Debug, Clone)]
pub struct Adversary {
    standardizer: Standardizer,
    net: Mlp,
    constant: Vec<Option<u8>>,
}

impl Adversary {
    pub fn train(features: &[Vec<f64>], labels: &[Vec<u8>], cfg: &AdversaryConfig, seed_value: u64) -> Result<Adversary> {
        if features.is_empty() || features.len() != labels.len() {
            return shape("adversary needs one label vector per feature vector");
        }
        let k = features[0].len();
        let m = labels[0].len();
        if k == 0 || m == 0 || features.iter().any(|f| f.len() != k) || labels.iter().any(|l| l.len() != m) {
            return shape("ragged adversary training data");
        }
        let flat: Vec<f64> = features.iter().flatten().copied().collect();
        let standardizer = Standardizer::fit(&Dataset::new(k, flat, vec![0; features.len()])?);
        let x: Vec<f64> = features.iter().flat_map(|f| standardizer.transform(f)).collect();
        let t: Vec<f64> = labels.iter().flatten().map(|&v| v as f64).collect();
        let constant = (0..m)
            .map(|j| {
                let first = labels[0][j];
                labels.iter().all(|l| l[j] == first).then_some(first)
            })
            .collect();
        let mut sizes = vec![k];
        sizes.extend(&cfg.hidden);
        sizes.push(m);
        let mut rng = seed::rng(seed_value);
        let mut net = Mlp::init(&sizes, &mut rng)?;
        let fit_cfg = FitConfig { epochs: cfg.epochs, batch: cfg.batch, lr: cfg.lr, weight_decay: cfg.weight_decay };
        nn::fit(&mut net, &x, &t, &fit_cfg, &mut rng)?;
        Ok(Adversary { standardizer, net, constant })
    }

    /// Membership probabilities per cohort.
    pub fn predict_proba(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.net.inputs() {
            return shape(format!("adversary expects {} features, got {}", self.net.inputs(), features.len()));
        }
        let p = self.net.predict(&self.standardizer.transform(features));
        Ok(p.into_iter()
            .zip(&self.constant)
            .map(|(p, c)| c.map(f64::from).unwrap_or(p))
            .collect())
    }

    pub fn predict(&self, features: &[f64]) -> Result<Vec<u8>> {
        Ok(self.predict_proba(features)?.into_iter().map(|p| (p > 0.5) as u8).collect())
    }
}

/// Fraction of agreeing entries over all records and labels.
pub fn hamming_score(preds: &[Vec<u8>], labels: &[Vec<u8>]) -> Result<f64> {
    if preds.len() != labels.len() || preds.iter().zip(labels).any(|(p, l)| p.len() != l.len()) {
        return shape("prediction and label shapes differ");
    }
    let total: usize = labels.iter().map(|l| l.len()).sum();
    if total == 0 {
        return argument("no labels to score");
    }
    let hits: usize = preds.iter().zip(labels).map(|(p, l)| p.iter().zip(l).filter(|(a, b)| a == b).count()).sum();
    Ok(hits as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub mean: f64,
    pub std: f64,
}

impl Score {
    pub fn from_samples(v: &[f64]) -> Score {
        Score { mean: stats::mean(v), std: stats::std_dev(v) }
    }
}

impl std::fmt::Display for Score {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub repeats: usize,
    pub folds: usize,
    pub adversary: AdversaryConfig,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig { repeats: 5, folds: 5, adversary: AdversaryConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub overall: Score,
    pub per_label: Vec<Score>,
    /// Overall score of each repeat.
    pub repeats: Vec<f64>,
    /// Labels constant across the whole corpus; scored trivially.
    pub degenerate: Vec<bool>,
}

/// Fold assignment stratified by label pattern.
fn pattern_folds(labels: &[Vec<u8>], k: usize, seed_value: u64) -> Vec<usize> {
    let mut groups: BTreeMap<&[u8], Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l.as_slice()).or_default().push(i);
    }
    let mut rng = seed::rng(seed_value);
    let mut fold = vec![0; labels.len()];
    let mut offset = 0;
    for (_, mut idx) in groups {
        idx.shuffle(&mut rng);
        for (pos, i) in idx.iter().enumerate() {
            fold[*i] = (pos + offset) % k;
        }
        offset += idx.len();
    }
    fold
}

/// Repeated k-fold evaluation: each record is predicted by the adversary
/// trained on the other folds, thresholded at 0.5, and scored.
pub fn run_attack(corpus: &AttackCorpus, cfg: &AttackConfig, seed_value: u64) -> Result<AttackResult> {
    if cfg.repeats == 0 || cfg.folds < 2 {
        return argument("attack needs at least one repeat and two folds");
    }
    if corpus.len() < cfg.folds {
        return argument(format!("{} records cannot fill {} folds", corpus.len(), cfg.folds));
    }
    let m = corpus.label_len();
    let degenerate: Vec<bool> = (0..m)
        .map(|j| corpus.labels.iter().all(|l| l[j] == corpus.labels[0][j]))
        .collect();
    for (j, d) in degenerate.iter().enumerate() {
        if *d {
            log::warn!("label {j} is constant across the corpus and scores trivially");
        }
    }
    let mut overall = Vec::with_capacity(cfg.repeats);
    let mut per_label = vec![Vec::with_capacity(cfg.repeats); m];
    for rep in 0..cfg.repeats {
        let fold = pattern_folds(&corpus.labels, cfg.folds, seed::derive(seed_value, "attack-folds", &[rep as u64]));
        let fold_preds: Vec<Vec<(usize, Vec<u8>)>> = (0..cfg.folds)
            .into_par_iter()
            .map(|f| {
                let train: Vec<usize> = (0..corpus.len()).filter(|&i| fold[i] != f).collect();
                let test: Vec<usize> = (0..corpus.len()).filter(|&i| fold[i] == f).collect();
                if test.is_empty() {
                    return Ok(Vec::new());
                }
                let feats: Vec<Vec<f64>> = train.iter().map(|&i| corpus.features[i].clone()).collect();
                let labs: Vec<Vec<u8>> = train.iter().map(|&i| corpus.labels[i].clone()).collect();
                let adv = Adversary::train(
                    &feats,
                    &labs,
                    &cfg.adversary,
                    seed::derive(seed_value, "adversary", &[rep as u64, f as u64]),
                )?;
                test.iter().map(|&i| Ok((i, adv.predict(&corpus.features[i])?))).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut preds = vec![Vec::new(); corpus.len()];
        for (i, p) in fold_preds.into_iter().flatten() {
            preds[i] = p;
        }
        for (j, d) in degenerate.iter().enumerate() {
            if *d {
                preds.iter_mut().for_each(|p| p[j] = corpus.labels[0][j]);
            }
        }
        overall.push(hamming_score(&preds, &corpus.labels)?);
        for (j, acc) in per_label.iter_mut().enumerate() {
            let col_p: Vec<Vec<u8>> = preds.iter().map(|p| vec![p[j]]).collect();
            let col_l: Vec<Vec<u8>> = corpus.labels.iter().map(|l| vec![l[j]]).collect();
            acc.push(hamming_score(&col_p, &col_l)?);
        }
    }
    Ok(AttackResult {
        overall: Score::from_samples(&overall),
        per_label: per_label.iter().map(|v| Score::from_samples(v)).collect(),
        repeats: overall,
        degenerate,
    })
}

/// The same corpus with label vectors permuted across records, destroying
/// any feature-label association.
pub fn shuffle_labels(corpus: &AttackCorpus, seed_value: u64) -> AttackCorpus {
    let mut out = corpus.clone();
    out.labels.shuffle(&mut seed::rng(seed_value));
    out
}

/// No-signal reference: the attack on label-shuffled copies, with a fresh
/// permutation for every repeat.
pub fn shuffled_baseline(corpus: &AttackCorpus, cfg: &AttackConfig, seed_value: u64) -> Result<AttackResult> {
    if corpus.is_empty() {
        return Err(Error::Argument("empty corpus".into()));
    }
    let single = AttackConfig { repeats: 1, ..cfg.clone() };
    let runs = (0..cfg.repeats)
        .map(|rep| {
            let shuffled = shuffle_labels(corpus, seed::derive(seed_value, "shuffle", &[rep as u64]));
            run_attack(&shuffled, &single, seed::derive(seed_value, "baseline", &[rep as u64]))
        })
        .collect::<Result<Vec<_>>>()?;
    if runs.is_empty() {
        return argument("attack needs at least one repeat and two folds");
    }
    let overall: Vec<f64> = runs.iter().map(|r| r.repeats[0]).collect();
    let m = corpus.label_len();
    let per_label = (0..m)
        .map(|j| Score::from_samples(&runs.iter().map(|r| r.per_label[j].mean).collect::<Vec<_>>()))
        .collect();
    Ok(AttackResult {
        overall: Score::from_samples(&overall),
        per_label,
        repeats: overall,
        degenerate: runs[0].degenerate.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::privacy::corpus::Provenance;
    use rand::Rng as _;

    fn prov() -> Provenance {
        Provenance { job: "t".into(), union: "1".into(), replicate: 0, seed: 0, access: "wb".into() }
    }

    fn corpus(features: impl Fn(&[u8], &mut seed::Rng) -> Vec<f64>) -> AttackCorpus {
        let patterns = [vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1], vec![1, 1, 0], vec![1, 0, 1], vec![0, 1, 1]];
        let mut rng = seed::rng(5);
        let mut c = AttackCorpus::default();
        for _ in 0..20 {
            for p in &patterns {
                let f = features(p, &mut rng);
                c.push(prov(), f, p.clone()).unwrap();
            }
        }
        c
    }

    #[test]
    fn hamming_hand_cases() {
        let l = vec![vec![1, 0, 1]];
        assert_eq!(hamming_score(&l, &l).unwrap(), 1.0);
        assert_eq!(hamming_score(&[vec![0, 1, 0]], &l).unwrap(), 0.0);
        assert!((hamming_score(&[vec![1, 0, 1]], &[vec![1, 1, 1]]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(hamming_score(&[vec![1, 0]], &l).is_err());
    }

    #[test]
    fn perfect_signal_is_found() {
        let c = corpus(|p, rng| {
            let mut f: Vec<f64> = p.iter().map(|&v| v as f64 + 0.01 * rng.gen::<f64>()).collect();
            f.extend((0..5).map(|_| rng.gen::<f64>()));
            f
        });
        let r = run_attack(&c, &AttackConfig { repeats: 2, ..Default::default() }, 1).unwrap();
        assert!(r.overall.mean >= 0.99, "{:?}", r);
    }

    #[test]
    fn no_signal_scores_near_majority_rate() {
        let c = corpus(|_, rng| (0..8).map(|_| rng.gen::<f64>()).collect());
        let r = run_attack(&c, &AttackConfig { repeats: 2, ..Default::default() }, 1).unwrap();
        // each label is 1 in half of the patterns
        assert!((r.overall.mean - 0.5).abs() <= 0.1, "{:?}", r);
    }

    #[test]
    fn constant_labels_are_flagged() {
        let mut c = corpus(|p, _| p.iter().map(|&v| v as f64).collect());
        c.labels.iter_mut().for_each(|l| l.push(1));
        let r = run_attack(&c, &AttackConfig { repeats: 1, ..Default::default() }, 1).unwrap();
        assert_eq!(r.degenerate, vec![false, false, false, true]);
        assert_eq!(r.per_label[3].mean, 1.0);
    }

    #[test]
    fn attack_is_deterministic() {
        let c = corpus(|p, rng| p.iter().map(|&v| v as f64 + rng.gen::<f64>()).collect());
        let cfg = AttackConfig { repeats: 2, ..Default::default() };
        assert_eq!(run_attack(&c, &cfg, 4).unwrap(), run_attack(&c, &cfg, 4).unwrap());
    }
}

//! Single-feature sensitivities of a tensor train, with every other input
//! marginalized inside the network.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohorts::{self, CANCER_TYPES, TYPE_OFFSET};
use crate::data::Dataset;
use crate::error::{argument, shape, Error, Result};
use crate::tensorize::detect_binary;
use crate::tt::{SiteMeasure, SiteValue, TensorTrain};

/// How marginalized inputs are summed out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weighting {
    /// Every embedding index with unit weight.
    UniformIndex,
    /// Empirical embedding moments per input: `E[φ]` for linear
    /// contractions and `E[φφᵀ]` (row-major) for squared ones.
    Empirical { means: Vec<Vec<f64>>, grams: Vec<Vec<f64>> },
}

impl Weighting {
    /// Empirical moments of the embedded columns of `data`.
    pub fn empirical(tt: &TensorTrain, data: &Dataset) -> Result<Weighting> {
        if data.features() != tt.num_inputs() || data.is_empty() {
            return shape("data does not match the tensor train inputs");
        }
        let d = tt.embedding().dim();
        let n = data.len() as f64;
        let mut means = vec![vec![0.0; d]; data.features()];
        let mut grams = vec![vec![0.0; d * d]; data.features()];
        for row in data.rows() {
            for (j, &x) in row.iter().enumerate() {
                let phi = tt.embedding().embed(x);
                for a in 0..d {
                    means[j][a] += phi[a] / n;
                    for b in 0..d {
                        grams[j][a * d + b] += phi[a] * phi[b] / n;
                    }
                }
            }
        }
        Ok(Weighting::Empirical { means, grams })
    }

    fn vector(&self, j: usize, d: usize) -> Vec<f64> {
        match self {
            Weighting::UniformIndex => vec![1.0; d],
            Weighting::Empirical { means, .. } => means[j].clone(),
        }
    }

    fn measure(&self, j: usize) -> SiteMeasure {
        match self {
            Weighting::UniformIndex => SiteMeasure::Uniform,
            Weighting::Empirical { grams, .. } => SiteMeasure::Gram(grams[j].clone()),
        }
    }
}

/// What is differenced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// Born class-1 probability from squared marginals.
    Probability,
    /// Linear marginal of the class-1 amplitude (the only value for a TT
    /// without an output site).
    Amplitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityConfig {
    /// Point at which a continuous feature is incremented, one per input.
    pub base: Vec<f64>,
    /// Binary inputs are flipped 0 → 1 instead of incremented.
    pub binary: Vec<bool>,
    pub weighting: Weighting,
    pub score: ScoreKind,
    pub names: Vec<String>,
}

impl SensitivityConfig {
    /// Column means as base points, binary columns detected from the data,
    /// empirical moment weighting and Born probabilities.
    pub fn from_data(tt: &TensorTrain, data: &Dataset) -> Result<SensitivityConfig> {
        let p = data.features();
        let n = data.len().max(1) as f64;
        let mut base = vec![0.0; p];
        for row in data.rows() {
            for (b, v) in base.iter_mut().zip(row) {
                *b += v / n;
            }
        }
        let names = if p == cohorts::FEATURES { cohorts::feature_names() } else { (0..p).map(|j| format!("x{j}")).collect() };
        Ok(SensitivityConfig {
            base,
            binary: detect_binary(data),
            weighting: Weighting::empirical(tt, data)?,
            score: ScoreKind::Probability,
            names,
        })
    }

    fn validate(&self, inputs: usize) -> Result<()> {
        if self.base.len() != inputs || self.binary.len() != inputs || self.names.len() != inputs {
            return shape(format!("sensitivity config does not describe {inputs} inputs"));
        }
        if let Weighting::Empirical { means, grams } = &self.weighting {
            if means.len() != inputs || grams.len() != inputs {
                return shape("empirical weighting does not describe every input");
            }
        }
        Ok(())
    }

    /// Configuration for the inputs left after dropping `removed`.
    fn without(&self, removed: &[usize]) -> SensitivityConfig {
        let keep = |j: &usize| !removed.contains(j);
        let pick = |v: &[f64]| (0..v.len()).filter(keep).map(|j| v[j]).collect::<Vec<_>>();
        SensitivityConfig {
            base: pick(&self.base),
            binary: (0..self.binary.len()).filter(keep).map(|j| self.binary[j]).collect(),
            weighting: match &self.weighting {
                Weighting::UniformIndex => Weighting::UniformIndex,
                Weighting::Empirical { means, grams } => Weighting::Empirical {
                    means: (0..means.len()).filter(keep).map(|j| means[j].clone()).collect(),
                    grams: (0..grams.len()).filter(keep).map(|j| grams[j].clone()).collect(),
                },
            },
            score: self.score,
            names: (0..self.names.len()).filter(keep).map(|j| self.names[j].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityEntry {
    pub feature: String,
    pub raw: f64,
    pub normalized: f64,
    /// The marginal had zero mass; the score is reported as 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub entries: Vec<SensitivityEntry>,
    /// Largest absolute raw score (1 when every score is 0).
    pub normalizer: f64,
    /// `None` for the unconditioned model, otherwise the cancer type index.
    pub context: Option<usize>,
    pub source: String,
}

impl SensitivityReport {
    fn from_raw(names: Vec<String>, raw: Vec<(f64, bool)>, context: Option<usize>, source: &str) -> Self {
        let max = raw.iter().map(|r| r.0.abs()).fold(0.0, f64::max);
        let normalizer = if max > 0.0 { max } else { 1.0 };
        let entries = names
            .into_iter()
            .zip(raw)
            .map(|(feature, (r, degenerate))| SensitivityEntry { feature, raw: r, normalized: r / normalizer, degenerate })
            .collect();
        SensitivityReport { entries, normalizer, context, source: source.to_string() }
    }

    pub fn raw(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.raw).collect()
    }

    pub fn normalized(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.normalized).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.raw.abs()).fold(0.0, f64::max)
    }

    /// Re-normalize the normalized scores; idempotent.
    pub fn renormalized(&self) -> SensitivityReport {
        let raw = self.entries.iter().map(|e| (e.normalized, e.degenerate)).collect();
        let names = self.entries.iter().map(|e| e.feature.clone()).collect();
        SensitivityReport::from_raw(names, raw, self.context, &self.source)
    }

    pub fn context_label(&self) -> String {
        match self.context {
            None => "all".to_string(),
            Some(t) => format!("cancer_type_{:02}", t + 1),
        }
    }

    /// CSV with columns feature, raw_score, normalized_score, context.
    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["feature", "raw_score", "normalized_score", "context"])?;
        for e in &self.entries {
            w.write_record([e.feature.clone(), e.raw.to_string(), e.normalized.to_string(), self.context_label()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Class-1 score with every input marginalized except those in `fixed`
/// (input index, raw value).
fn marginal_score(tt: &TensorTrain, cfg: &SensitivityConfig, fixed: &[(usize, f64)]) -> Result<Option<f64>> {
    let sites = tt.input_sites();
    let d = tt.embedding().dim();
    let n = tt.num_sites();
    let lookup = |j: usize| fixed.iter().find(|f| f.0 == j).map(|f| f.1);
    match cfg.score {
        ScoreKind::Amplitude => {
            let mut vectors = vec![Vec::new(); n];
            for (j, &s) in sites.iter().enumerate() {
                vectors[s] = match lookup(j) {
                    Some(x) => tt.embedding().embed(x),
                    None => cfg.weighting.vector(j, d),
                };
            }
            if let Some(o) = tt.output_site() {
                let classes = tt.cores()[o].dim();
                let mut e = vec![0.0; classes];
                e[1.min(classes - 1)] = 1.0;
                vectors[o] = e;
            }
            Ok(Some(tt.contract_linear(&vectors)?))
        }
        ScoreKind::Probability => {
            let o = tt
                .output_site()
                .ok_or_else(|| Error::Argument("probability sensitivities need an output site".into()))?;
            let mut measures = vec![SiteMeasure::Uniform; n];
            for (j, &s) in sites.iter().enumerate() {
                measures[s] = match lookup(j) {
                    Some(x) => SiteMeasure::Point(tt.embedding().embed(x)),
                    None => cfg.weighting.measure(j),
                };
            }
            let classes = tt.cores()[o].dim();
            let mut mass = Vec::with_capacity(classes);
            for y in 0..classes {
                measures[o] = SiteMeasure::Index(y);
                mass.push(tt.contract_squared(&measures)?);
            }
            let total: f64 = mass.iter().sum();
            if total <= 0.0 || !total.is_finite() {
                return Ok(None);
            }
            Ok(Some(mass[1.min(classes - 1)] / total))
        }
    }
}

/// Change of the marginal score of input `j` between its base point and a
/// unit increment (continuous) or between 0 and 1 (binary), with some
/// inputs optionally held at fixed raw values.
pub fn sensitivity_with_fixed(tt: &TensorTrain, cfg: &SensitivityConfig, j: usize, fixed: &[(usize, f64)]) -> Result<(f64, bool)> {
    let (lo, hi) = if cfg.binary[j] { (0.0, 1.0) } else { (cfg.base[j], cfg.base[j] + 1.0) };
    let mut a = fixed.to_vec();
    a.push((j, lo));
    let mut b = fixed.to_vec();
    b.push((j, hi));
    match (marginal_score(tt, cfg, &a)?, marginal_score(tt, cfg, &b)?) {
        (Some(p0), Some(p1)) => Ok((p1 - p0, false)),
        _ => Ok((0.0, true)),
    }
}

pub fn feature_sensitivity(tt: &TensorTrain, cfg: &SensitivityConfig, source: &str) -> Result<SensitivityReport> {
    cfg.validate(tt.num_inputs())?;
    let raw = (0..tt.num_inputs())
        .into_par_iter()
        .map(|j| sensitivity_with_fixed(tt, cfg, j, &[]))
        .collect::<Result<Vec<_>>>()?;
    for (j, r) in raw.iter().enumerate() {
        if r.1 {
            log::warn!("marginal of {} has zero mass", cfg.names[j]);
        }
    }
    Ok(SensitivityReport::from_raw(cfg.names.clone(), raw, None, source))
}

/// Raw values pinning the cancer-type block to `cancer_type`.
pub fn type_assignment(cancer_type: usize) -> Result<Vec<(usize, f64)>> {
    if cancer_type >= CANCER_TYPES {
        return argument(format!("cancer type {cancer_type} outside 0..{CANCER_TYPES}"));
    }
    Ok((0..CANCER_TYPES).map(|t| (TYPE_OFFSET + t, (t == cancer_type) as u8 as f64)).collect())
}

/// Condition the whole one-hot block (one site to 1, the rest to 0) and
/// compute sensitivities of the remaining inputs on the reduced train.
pub fn sensitivity_by_type(tt: &TensorTrain, cfg: &SensitivityConfig, cancer_type: usize, source: &str) -> Result<SensitivityReport> {
    if tt.num_inputs() != cohorts::FEATURES {
        return shape(format!("type conditioning needs the {}-feature cohort schema", cohorts::FEATURES));
    }
    cfg.validate(tt.num_inputs())?;
    let assign = type_assignment(cancer_type)?;
    let fixed = assign
        .iter()
        .map(|&(j, v)| Ok((tt.feature_site(j)?, SiteValue::Raw(v))))
        .collect::<Result<Vec<_>>>()?;
    let reduced = tt.condition_many(&fixed)?;
    let removed: Vec<usize> = assign.iter().map(|a| a.0).collect();
    let mut report = feature_sensitivity(&reduced, &cfg.without(&removed), source)?;
    report.context = Some(cancer_type);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tt::{Core, Embedding, InputScale};

    /// Rank-2 train with `f(x) = b + Σ w_j x_j` on the `[1, x]` embedding,
    /// no output site.
    fn linear_tt(w: &[f64], b: f64) -> TensorTrain {
        let n = w.len();
        let mut cores = Vec::with_capacity(n);
        for (k, &wk) in w.iter().enumerate() {
            // state 0: nothing linear taken yet, state 1: already taken
            let (l, r) = (if k == 0 { 1 } else { 2 }, if k == n - 1 { 1 } else { 2 });
            let mut c = Core::zeros(l, 2, r);
            if k == 0 && n == 1 {
                c.set(0, 0, 0, b);
                c.set(0, 1, 0, wk);
            } else if k == 0 {
                c.set(0, 0, 0, 1.0);
                c.set(0, 1, 1, wk);
                c.set(0, 0, 1, b);
            } else if k == n - 1 {
                c.set(0, 1, 0, wk);
                c.set(1, 0, 0, 1.0);
            } else {
                c.set(0, 0, 0, 1.0);
                c.set(0, 1, 1, wk);
                c.set(1, 0, 1, 1.0);
            }
            cores.push(c);
        }
        TensorTrain::new(cores, None, InputScale::Raw, Embedding::Poly1).unwrap()
    }

    fn amp_cfg(n: usize) -> SensitivityConfig {
        SensitivityConfig {
            base: vec![0.5; n],
            binary: vec![false; n],
            weighting: Weighting::UniformIndex,
            score: ScoreKind::Amplitude,
            names: (0..n).map(|j| format!("x{j}")).collect(),
        }
    }

    #[test]
    fn linear_train_encodes_its_form() {
        let w = [0.5, -2.0, 1.5, 0.1];
        let tt = linear_tt(&w, 0.7);
        let x = [0.3, -1.0, 2.0, 4.0];
        let mut vs: Vec<Vec<f64>> = x.iter().map(|&v| vec![1.0, v]).collect();
        let want = 0.7 + w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        assert!((tt.contract_linear(&vs).unwrap() - want).abs() < 1e-12);
        vs[0] = vec![1.0, 0.0];
        assert!((tt.contract_linear(&vs).unwrap() - (want - 0.15)).abs() < 1e-12);
    }

    #[test]
    fn linear_sensitivities_are_the_weights() {
        let w = [0.5, -2.0, 1.5, 0.1, -0.05];
        let r = feature_sensitivity(&linear_tt(&w, 0.7), &amp_cfg(5), "linear").unwrap();
        let wmax = 2.0;
        for (e, &wj) in r.entries.iter().zip(&w) {
            assert!((e.raw - wj).abs() < 1e-9);
            assert!((e.normalized - wj / wmax).abs() < 1e-6);
        }
        let mut by_r: Vec<usize> = (0..5).collect();
        by_r.sort_by(|&a, &b| r.entries[a].raw.abs().total_cmp(&r.entries[b].raw.abs()));
        let mut by_w: Vec<usize> = (0..5).collect();
        by_w.sort_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs()));
        assert_eq!(by_r, by_w);
    }

    #[test]
    fn constant_model_has_zero_sensitivity() {
        let r = feature_sensitivity(&linear_tt(&[0.0; 4], 0.7), &amp_cfg(4), "const").unwrap();
        assert!(r.raw().iter().all(|&v| v.abs() < 1e-15));
        assert_eq!(r.normalizer, 1.0);
    }

    #[test]
    fn normalization_is_idempotent() {
        let r = feature_sensitivity(&linear_tt(&[0.5, -2.0, 1.5], 0.1), &amp_cfg(3), "l").unwrap();
        let once = r.renormalized();
        assert_eq!(once.normalized(), once.renormalized().normalized());
        assert!(r.normalized().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn probability_mode_matches_enumeration() {
        use crate::tt::testutil::random_tt;
        let tt = random_tt(4, 3, 8);
        let cfg = SensitivityConfig { score: ScoreKind::Probability, ..amp_cfg(4) };
        let (s, _) = sensitivity_with_fixed(&tt, &cfg, 2, &[]).unwrap();
        // brute force over index strings of the other inputs; the output is
        // the last site of `random_tt`
        let prob = |x2: f64| {
            let mut m = [0.0; 2];
            for idx in crate::tt::testutil::all_indices(&[2, 2, 2]) {
                for (y, mm) in m.iter_mut().enumerate() {
                    let amp: f64 = (0..2)
                        .map(|i2| {
                            let full = [idx[0], idx[1], i2, idx[2], y];
                            tt.eval_index(&full).unwrap() * [1.0, x2][i2]
                        })
                        .sum();
                    *mm += amp * amp;
                }
            }
            m[1] / (m[0] + m[1])
        };
        assert!((s - (prob(1.5) - prob(0.5))).abs() < 1e-10);
    }
}

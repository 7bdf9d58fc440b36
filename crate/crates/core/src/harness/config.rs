//! Experiment configuration, loadable from TOML or JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cohorts::{self, Cohort, CohortSpec, LatentModel};
use crate::error::{Error, Result};
use crate::predictors::{LrHyper, Mechanism, MlpHyper};
use crate::privacy::{AccessLevel, AdversaryConfig, AttackConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSource {
    /// Named spec list, used when neither `specs` nor `paths` is given.
    pub preset: String,
    pub specs: Option<Vec<CohortSpec>>,
    /// Cohort CSV files; when present the generator is not used.
    pub paths: Option<Vec<PathBuf>>,
    /// Overrides the drift of every generated cohort.
    pub drift: Option<f64>,
    /// Rows per cohort in the held-out utility set.
    pub holdout_size: usize,
}

impl Default for CohortSource {
    fn default() -> Self {
        CohortSource { preset: "desk".into(), specs: None, paths: None, drift: None, holdout_size: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelGrid {
    pub lr: Vec<LrHyper>,
    pub mlp: Vec<MlpHyper>,
    /// Mechanism used by the `averaged` targets.
    pub averaged: Mechanism,
}

impl Default for ModelGrid {
    fn default() -> Self {
        ModelGrid {
            lr: vec![LrHyper::new(0.0, 1.0), LrHyper::new(0.5, 1.0)],
            mlp: vec![MlpHyper::default()],
            averaged: Mechanism::Averaged { j: 20, k: 3 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SketchSettings {
    pub pivots: usize,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TensorizeSettings {
    /// Discretization bins of the construction queries, one TT target per entry.
    pub bins: Vec<usize>,
    pub lr: SketchSettings,
    pub mlp: SketchSettings,
    pub ridge: f64,
}

impl Default for TensorizeSettings {
    fn default() -> Self {
        TensorizeSettings {
            bins: vec![2, 6, 10],
            lr: SketchSettings { pivots: 50, rank: 2 },
            mlp: SketchSettings { pivots: 80, rank: 5 },
            ridge: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSettings {
    pub access: Vec<AccessLevel>,
    /// Probe samples (S).
    pub probes: usize,
    /// Shadow replicates per union and configuration (R).
    pub replicates: usize,
    pub union_cap: usize,
    pub repeats: usize,
    pub folds: usize,
    pub adversary: AdversaryConfig,
    /// Target families: lr-vanilla, lr-averaged, mlp-vanilla, mlp-averaged,
    /// tt-lr, tt-mlp, dp-lr, dp-sgd.
    pub targets: Vec<String>,
}

impl Default for AttackSettings {
    fn default() -> Self {
        AttackSettings {
            access: vec![AccessLevel::Wbb(2), AccessLevel::Wbb(6), AccessLevel::Wbb(10), AccessLevel::Sbb, AccessLevel::Wb],
            probes: 100,
            replicates: 20,
            union_cap: 2,
            repeats: 5,
            folds: 5,
            adversary: AdversaryConfig::default(),
            targets: ["lr-vanilla", "lr-averaged", "mlp-vanilla", "tt-lr", "tt-mlp"].map(String::from).to_vec(),
        }
    }
}

impl AttackSettings {
    pub fn attack_config(&self) -> AttackConfig {
        AttackConfig { repeats: self.repeats, folds: self.folds, adversary: self.adversary.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefenseSettings {
    pub eps: Vec<f64>,
    pub sigma: Vec<f64>,
    pub dp_lr: LrHyper,
    pub dp_sgd_epochs: usize,
    pub dp_sgd_batch: usize,
    pub dp_sgd_clip: f64,
    pub dp_sgd_delta: f64,
    /// Families attacked by `defend`.
    pub targets: Vec<String>,
}

impl Default for DefenseSettings {
    fn default() -> Self {
        DefenseSettings {
            eps: vec![0.1, 1.0, 10.0, 100.0],
            sigma: vec![20.0, 5.0, 1.0, 0.0],
            dp_lr: LrHyper::new(0.0, 1.0),
            dp_sgd_epochs: 50,
            dp_sgd_batch: 32,
            dp_sgd_clip: 1.0,
            dp_sgd_delta: 1e-4,
            targets: ["dp-lr", "dp-sgd"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpretSettings {
    /// Cohort (0-based) the interpreted models are trained on.
    pub cohort: usize,
    /// Construction bins of the interpreted TT.
    pub tt_bins: usize,
    pub curve_bins: usize,
    pub bootstrap: usize,
}

impl Default for InterpretSettings {
    fn default() -> Self {
        InterpretSettings { cohort: 0, tt_bins: 6, curve_bins: 10, bootstrap: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSettings {
    pub decimals: u32,
    pub bind: String,
    /// Monotone display map as `(score, displayed)` points.
    pub display_map: Option<Vec<(f64, f64)>>,
    pub threads: usize,
}

impl Default for ServeSettings {
    fn default() -> Self {
        ServeSettings { decimals: 4, bind: "127.0.0.1:8080".into(), display_map: None, threads: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every sub-seed derives from it.
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub cohorts: CohortSource,
    pub models: ModelGrid,
    pub tensorize: TensorizeSettings,
    pub attack: AttackSettings,
    pub defenses: DefenseSettings,
    pub interpret: InterpretSettings,
    pub serve: ServeSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            out: None,
            workers: None,
            cohorts: CohortSource::default(),
            models: ModelGrid::default(),
            tensorize: TensorizeSettings::default(),
            attack: AttackSettings::default(),
            defenses: DefenseSettings::default(),
            interpret: InterpretSettings::default(),
            serve: ServeSettings::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parse by extension: `.json` is JSON, anything else TOML.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.cohorts.specs.is_none() && self.cohorts.paths.is_none() {
            cohorts::preset(&self.cohorts.preset).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(d) = self.cohorts.drift {
            if !(d >= 0.0 && d.is_finite()) {
                return bad(format!("drift {d} must be non-negative"));
            }
        }
        for h in &self.models.lr {
            h.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        self.models.averaged.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.models.lr.is_empty() || self.models.mlp.is_empty() {
            return bad("model grids must not be empty".into());
        }
        if let Some(b) = self.tensorize.bins.iter().find(|&&b| b < 2) {
            return bad(format!("construction bins must be at least 2, got {b}"));
        }
        for s in [self.tensorize.lr, self.tensorize.mlp] {
            if s.rank == 0 || s.pivots < s.rank {
                return bad(format!("sketch needs rank >= 1 and pivots >= rank, got {s:?}"));
            }
        }
        let a = &self.attack;
        if a.access.is_empty() || a.probes == 0 || a.replicates == 0 || a.union_cap == 0 {
            return bad("attack needs access levels, probes, replicates and a union cap".into());
        }
        if a.repeats == 0 || a.folds < 2 {
            return bad("attack needs at least one repeat and two folds".into());
        }
        if let Some(e) = self.defenses.eps.iter().find(|e| !(**e > 0.0)) {
            return bad(format!("privacy budget {e} must be positive"));
        }
        if let Some(s) = self.defenses.sigma.iter().find(|s| !(**s >= 0.0)) {
            return bad(format!("noise multiplier {s} must be non-negative"));
        }
        if self.serve.decimals < 1 {
            return bad("serving needs at least one decimal".into());
        }
        if self.interpret.bootstrap < 100 || self.interpret.curve_bins == 0 || self.interpret.tt_bins < 2 {
            return bad("interpretation needs >= 100 bootstrap resamples, bins and tt_bins >= 2".into());
        }
        for t in a.targets.iter().chain(&self.defenses.targets) {
            super::experiments::expand_family(t, self)?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring where output goes and
    /// how many workers run it.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        c.workers = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn cohort_specs(&self) -> Result<Vec<CohortSpec>> {
        let mut specs = match &self.cohorts.specs {
            Some(s) => s.clone(),
            None => cohorts::preset(&self.cohorts.preset)?,
        };
        if let Some(d) = self.cohorts.drift {
            specs.iter_mut().for_each(|s| s.drift = d);
        }
        Ok(specs)
    }

    /// Cohorts from files when configured, otherwise generated from the
    /// master seed.
    pub fn load_cohorts(&self) -> Result<Vec<Cohort>> {
        match &self.cohorts.paths {
            Some(paths) => paths.iter().map(|p| cohorts::load_csv(p)).collect(),
            None => cohorts::generate_cohorts(&self.cohort_specs()?, self.seed),
        }
    }

    /// Held-out rows from the same distributions as the generated cohorts.
    /// File-based cohorts have no generator, so a stratified 20% of each
    /// is held out instead.
    pub fn holdout(&self, cohorts: &[Cohort]) -> Result<(Vec<Cohort>, Vec<Cohort>)> {
        match &self.cohorts.paths {
            None => Ok((
                cohorts.to_vec(),
                cohorts::generate_holdout(&self.cohort_specs()?, &LatentModel::default(), self.seed, self.cohorts.holdout_size)?,
            )),
            Some(_) => {
                let mut train = Vec::new();
                let mut test = Vec::new();
                for (m, c) in cohorts.iter().enumerate() {
                    let (a, b) = c.data.stratified_split(0.8, crate::seed::derive(self.seed, "holdout-split", &[m as u64]));
                    train.push(Cohort::new(c.name.clone(), c.data.subset(&a))?);
                    test.push(Cohort::new(format!("{}_holdout", c.name), c.data.subset(&b))?);
                }
                Ok((train, test))
            }
        }
    }
}

//! Experiment runners shared by the CLI and the acceptance checks.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::serve::{Server, ServeOptions};
use super::table::{ScoreRow, ScoreTable};
use crate::cohorts::{self, Cohort, CANCER_TYPES, FEATURES, TYPE_OFFSET};
use crate::data::Dataset;
use crate::defenses::{approx_epsilon, dp_lr_train, dp_sgd_train, DpSgdConfig};
use crate::error::{Error, Result};
use crate::interpret::{
    feature_sensitivity, monotonicity_curve, sensitivity_by_type, MonotonicityCurve, SensitivityConfig, SensitivityReport,
};
use crate::predictors::{eval_metrics, lr_train, train_mechanism, Arch, LogisticModel, Mechanism, Model, Scorer};
use crate::privacy::{
    build_shadow_corpus, canonicalize, invert_monotone_map, recover_lr_coeffs, run_attack, select_probes, shuffled_baseline,
    AccessLevel, Adversary, AttackCorpus, RecoveryConfig, Score, ShadowJob, ShadowPlan, Target,
};
use crate::seed;
use crate::standardize::Standardizer;
use crate::stats;
use crate::tensorize::{tensorize_model, BlackBox, Oracle, RemoteOracle, TensorizeConfig};
use crate::tt::TensorTrain;

/// A family of target models: one row of a score table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Lr(Mechanism),
    Mlp(Mechanism),
    /// Vanilla LR released as a TT built from `b`-bin queries.
    TtLr(usize),
    TtMlp(usize),
    DpLr(f64),
    DpSgd(f64),
}

impl Family {
    /// Stable identifier, also accepted by [`expand_family`].
    pub fn key(&self) -> String {
        match self {
            Family::Lr(m) => format!("lr-{}", mech_key(m)),
            Family::Mlp(m) => format!("mlp-{}", mech_key(m)),
            Family::TtLr(b) => format!("tt-lr-b{b}"),
            Family::TtMlp(b) => format!("tt-mlp-b{b}"),
            Family::DpLr(e) => format!("dp-lr-eps{e}"),
            Family::DpSgd(s) => format!("dp-sgd-sigma{s}"),
        }
    }

    pub fn model(&self) -> &'static str {
        match self {
            Family::Lr(_) | Family::TtLr(_) | Family::DpLr(_) => "LR",
            Family::Mlp(_) | Family::TtMlp(_) | Family::DpSgd(_) => "NN",
        }
    }

    pub fn defense(&self) -> String {
        match self {
            Family::Lr(Mechanism::Vanilla) | Family::Mlp(Mechanism::Vanilla) => "vanilla".into(),
            Family::Lr(Mechanism::Averaged { j, k }) | Family::Mlp(Mechanism::Averaged { j, k }) => {
                format!("averaged J={j} K={k}")
            }
            Family::TtLr(b) | Family::TtMlp(b) => format!("TT b={b}"),
            Family::DpLr(e) => format!("DP ε={e}"),
            Family::DpSgd(s) => match approx_epsilon(*s) {
                Some(e) => format!("DP-SGD σ={s} (ε≈{e:.2})"),
                None => format!("DP-SGD σ={s} (ε=∞)"),
            },
        }
    }

    fn epsilon(&self) -> Option<f64> {
        match self {
            Family::DpLr(e) => Some(*e),
            Family::DpSgd(s) => approx_epsilon(*s),
            _ => None,
        }
    }
}

fn mech_key(m: &Mechanism) -> String {
    match m {
        Mechanism::Vanilla => "vanilla".into(),
        Mechanism::Averaged { j, k } => format!("averaged-j{j}-k{k}"),
    }
}

/// Resolve a target name. Group names expand over the configured grids:
/// `tt-lr`/`tt-mlp` over the construction bins, `dp-lr` over ε and
/// `dp-sgd` over σ. Any [`Family::key`] is accepted verbatim.
pub fn expand_family(name: &str, cfg: &ExperimentConfig) -> Result<Vec<Family>> {
    let bins = &cfg.tensorize.bins;
    let unknown = || Error::Config(format!("unknown target family {name:?}"));
    let num = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0).ok_or_else(unknown);
    let bin = |s: &str| s.parse::<usize>().ok().filter(|b| *b >= 2).ok_or_else(unknown);
    let mech = |s: &str| -> Result<Mechanism> {
        match s {
            "vanilla" => Ok(Mechanism::Vanilla),
            "averaged" => Ok(cfg.models.averaged),
            _ => {
                let rest = s.strip_prefix("averaged-j").ok_or_else(unknown)?;
                let (j, k) = rest.split_once("-k").ok_or_else(unknown)?;
                let m = Mechanism::Averaged { j: j.parse().map_err(|_| unknown())?, k: k.parse().map_err(|_| unknown())? };
                m.validate().map_err(|e| Error::Config(e.to_string()))?;
                Ok(m)
            }
        }
    };
    Ok(match name {
        "tt-lr" => bins.iter().map(|&b| Family::TtLr(b)).collect(),
        "tt-mlp" => bins.iter().map(|&b| Family::TtMlp(b)).collect(),
        "dp-lr" => cfg.defenses.eps.iter().map(|&e| Family::DpLr(e)).collect(),
        "dp-sgd" => cfg.defenses.sigma.iter().map(|&s| Family::DpSgd(s)).collect(),
        _ => {
            if let Some(b) = name.strip_prefix("tt-lr-b") {
                vec![Family::TtLr(bin(b)?)]
            } else if let Some(b) = name.strip_prefix("tt-mlp-b") {
                vec![Family::TtMlp(bin(b)?)]
            } else if let Some(e) = name.strip_prefix("dp-lr-eps") {
                let e = num(e)?;
                if e == 0.0 {
                    return Err(unknown());
                }
                vec![Family::DpLr(e)]
            } else if let Some(s) = name.strip_prefix("dp-sgd-sigma") {
                vec![Family::DpSgd(num(s)?)]
            } else if let Some(m) = name.strip_prefix("lr-") {
                vec![Family::Lr(mech(m)?)]
            } else if let Some(m) = name.strip_prefix("mlp-") {
                vec![Family::Mlp(mech(m)?)]
            } else {
                return Err(unknown());
            }
        }
    })
}

pub fn families(names: &[String], cfg: &ExperimentConfig) -> Result<Vec<Family>> {
    let mut out: Vec<Family> = Vec::new();
    for n in names {
        for f in expand_family(n, cfg)? {
            if !out.iter().any(|g| g.key() == f.key()) {
                out.push(f);
            }
        }
    }
    Ok(out)
}

pub fn tensorize_config(cfg: &ExperimentConfig, lr: bool, access: BlackBox) -> TensorizeConfig {
    let s = if lr { cfg.tensorize.lr } else { cfg.tensorize.mlp };
    TensorizeConfig { pivots: s.pivots, rank: s.rank, access, ridge: cfg.tensorize.ridge, gauge: true }
}

/// Train one member of `family` on `data`, using grid entry `g`.
pub fn train_target(family: &Family, cfg: &ExperimentConfig, g: usize, data: &Dataset, seed_value: u64) -> Result<Target> {
    let lr = |g: usize| Arch::Lr(cfg.models.lr[g % cfg.models.lr.len()]);
    let mlp = |g: usize| Arch::Mlp(cfg.models.mlp[g % cfg.models.mlp.len()].clone());
    let tt = |arch: Arch, is_lr: bool, b: usize| -> Result<Target> {
        let m = train_mechanism(&arch, data, &Mechanism::Vanilla, seed::derive(seed_value, "model", &[]))?;
        let tcfg = tensorize_config(cfg, is_lr, BlackBox::Wbb(b));
        Ok(Target::Tt(tensorize_model(&m, data, &tcfg, seed::derive(seed_value, "tensorize", &[]))?.tt))
    };
    match *family {
        Family::Lr(m) => Ok(Target::Model(train_mechanism(&lr(g), data, &m, seed_value)?)),
        Family::Mlp(m) => Ok(Target::Model(train_mechanism(&mlp(g), data, &m, seed_value)?)),
        Family::TtLr(b) => tt(lr(g), true, b),
        Family::TtMlp(b) => tt(mlp(g), false, b),
        Family::DpLr(e) => Ok(Target::Model(Model::Lr(dp_lr_train(data, e, &cfg.defenses.dp_lr, seed_value)?))),
        Family::DpSgd(s) => {
            let d = &cfg.defenses;
            let sgd = DpSgdConfig {
                sigma: s,
                clip: d.dp_sgd_clip,
                delta: d.dp_sgd_delta,
                epochs: d.dp_sgd_epochs,
                batch: d.dp_sgd_batch,
                hyper: cfg.models.mlp[g % cfg.models.mlp.len()].clone(),
            };
            Ok(Target::Model(Model::Mlp(dp_sgd_train(data, &sgd, seed_value)?.0)))
        }
    }
}

/// Number of hyperparameter settings a family is trained under.
pub fn grid_size(family: &Family, cfg: &ExperimentConfig) -> usize {
    match family {
        Family::Lr(_) | Family::TtLr(_) => cfg.models.lr.len(),
        Family::Mlp(_) | Family::TtMlp(_) | Family::DpSgd(_) => cfg.models.mlp.len(),
        Family::DpLr(_) => 1,
    }
}

pub fn shadow_jobs<'a>(family: &'a Family, cfg: &'a ExperimentConfig) -> Vec<ShadowJob<'a>> {
    (0..grid_size(family, cfg))
        .map(|g| ShadowJob::new(format!("{}-g{g}", family.key()), move |d: &Dataset, s: u64| train_target(family, cfg, g, d, s)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probes {
    /// `(cohort, row)` of each probe sample.
    pub ids: Vec<(usize, usize)>,
    pub rows: Vec<Vec<f64>>,
    pub seed: u64,
}

pub fn probes(cfg: &ExperimentConfig, cohorts: &[Cohort]) -> Result<Probes> {
    let seed = seed::derive(cfg.seed, "probes", &[]);
    let (ids, rows) = select_probes(cohorts, cfg.attack.probes, seed)?;
    Ok(Probes { ids, rows, seed })
}

pub struct FamilyRun {
    pub family: Family,
    pub row: ScoreRow,
    /// One corpus per configured access level.
    pub corpora: Vec<AttackCorpus>,
    pub shadow_seed: u64,
}

pub fn shadow_plan(cfg: &ExperimentConfig, m: usize, levels: Vec<AccessLevel>) -> ShadowPlan {
    ShadowPlan { unions: cohorts::enumerate_unions(m, cfg.attack.union_cap), replicates: cfg.attack.replicates, levels }
}

/// Build the shadow corpus of one family and attack it at every level,
/// next to the shuffled-label reference.
pub fn attack_family(family: &Family, cfg: &ExperimentConfig, cohorts: &[Cohort], probes: &Probes) -> Result<FamilyRun> {
    let key = family.key();
    let shadow_seed = seed::derive(cfg.seed, &format!("shadow/{key}"), &[]);
    let plan = shadow_plan(cfg, cohorts.len(), cfg.attack.access.clone());
    let corpora = build_shadow_corpus(cohorts, &shadow_jobs(family, cfg), &plan, &probes.rows, shadow_seed)?;
    let acfg = cfg.attack.attack_config();
    let mut cells = Vec::new();
    let mut chance = Vec::new();
    for (c, corpus) in corpora.iter().enumerate() {
        if corpus.is_empty() {
            log::warn!("{key}: no shadow target trained, {} cell left empty", plan.levels[c]);
            cells.push(None);
            chance.push(None);
            continue;
        }
        let s = seed::derive(cfg.seed, &format!("attack/{key}"), &[c as u64]);
        cells.push(Some(run_attack(corpus, &acfg, s)?));
        chance.push(Some(shuffled_baseline(corpus, &acfg, seed::derive(s, "chance", &[]))?));
    }
    log::info!("attacked {key}");
    let row = ScoreRow {
        model: family.model().into(),
        defense: family.defense(),
        cells,
        chance,
        failures: corpora.first().map_or(0, |c| c.failures.len()),
    };
    Ok(FamilyRun { family: *family, row, corpora, shadow_seed })
}

pub fn attack_table(cfg: &ExperimentConfig, cohorts: &[Cohort], families: &[Family]) -> Result<(ScoreTable, Vec<FamilyRun>, Probes)> {
    let probes = probes(cfg, cohorts)?;
    let mut table = ScoreTable::new(cfg.attack.access.clone());
    let mut runs = Vec::new();
    for f in families {
        let run = attack_family(f, cfg, cohorts, &probes)?;
        table.rows.push(run.row.clone());
        runs.push(run);
    }
    Ok((table, runs, probes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityRow {
    pub model: String,
    pub defense: String,
    pub epsilon: Option<f64>,
    /// Over independent training draws.
    pub balanced_accuracy: Score,
    pub auc: Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityTable {
    pub draws: usize,
    pub rows: Vec<UtilityRow>,
}

impl UtilityTable {
    pub fn row(&self, model: &str, defense: &str) -> Option<&UtilityRow> {
        self.rows.iter().find(|r| r.model == model && r.defense == defense)
    }

    pub fn render(&self) -> String {
        let mut out = format!("{:<34}  {:>15}  {:>15}\n", "model / defense", "balanced acc.", "AUC");
        out += &"-".repeat(68);
        out.push('\n');
        for r in &self.rows {
            out += &format!(
                "{:<34}  {:>15}  {:>15}\n",
                format!("{} / {}", r.model, r.defense),
                r.balanced_accuracy.to_string(),
                r.auc.to_string()
            );
        }
        out
    }
}

/// Train every family on the pooled training cohorts and evaluate on the
/// pooled held-out rows, averaging over `draws` training seeds.
pub fn utility_table(cfg: &ExperimentConfig, train: &[Cohort], holdout: &[Cohort], families: &[Family], draws: usize) -> Result<UtilityTable> {
    if draws == 0 {
        return Err(Error::Config("utility needs at least one draw".into()));
    }
    let all: Vec<usize> = (0..train.len()).collect();
    let data = cohorts::union(train, &all)?.data;
    let test = cohorts::union(holdout, &(0..holdout.len()).collect::<Vec<_>>())?.data;
    let rows = families
        .iter()
        .map(|f| {
            let metrics = (0..draws)
                .into_par_iter()
                .map(|d| {
                    let target = train_target(f, cfg, 0, &data, seed::derive(cfg.seed, &format!("utility/{}", f.key()), &[d as u64]))?;
                    eval_metrics(&target, &test)
                })
                .collect::<Result<Vec<_>>>()?;
            let ba: Vec<f64> = metrics.iter().map(|m| m.balanced_accuracy).collect();
            let auc: Vec<f64> = metrics.iter().map(|m| m.auc).collect();
            Ok(UtilityRow {
                model: f.model().into(),
                defense: f.defense(),
                epsilon: f.epsilon(),
                balanced_accuracy: Score::from_samples(&ba),
                auc: Score::from_samples(&auc),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UtilityTable { draws, rows })
}

/// LR trained on the interpretation cohort and its TT from `tt_bins`-bin
/// queries.
pub struct InterpretModels {
    pub data: Dataset,
    pub lr: LogisticModel,
    pub tt: TensorTrain,
}

pub fn interpret_models(cfg: &ExperimentConfig, cohorts: &[Cohort]) -> Result<InterpretModels> {
    let c = cohorts
        .get(cfg.interpret.cohort)
        .ok_or_else(|| Error::Config(format!("interpretation cohort {} does not exist", cfg.interpret.cohort)))?;
    let data = c.data.clone();
    let lr = lr_train(&data, &cfg.models.lr[0], seed::derive(cfg.seed, "interpret/lr", &[]))?;
    let tcfg = tensorize_config(cfg, true, BlackBox::Wbb(cfg.interpret.tt_bins));
    let tt = tensorize_model(&lr, &data, &tcfg, seed::derive(cfg.seed, "interpret/tt", &[]))?.tt;
    Ok(InterpretModels { data, lr, tt })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRun {
    pub global: SensitivityReport,
    /// One report per cancer type, in type order.
    pub by_type: Vec<SensitivityReport>,
    /// Pearson correlation of normalized sensitivities with the raw LR
    /// coefficients.
    pub coefficient_pearson: f64,
}

pub fn sensitivity_run(m: &InterpretModels) -> Result<SensitivityRun> {
    let scfg = SensitivityConfig::from_data(&m.tt, &m.data)?;
    let global = feature_sensitivity(&m.tt, &scfg, "tt")?;
    let by_type = (0..CANCER_TYPES)
        .map(|t| sensitivity_by_type(&m.tt, &scfg, t, "tt"))
        .collect::<Result<Vec<_>>>()?;
    let coefficient_pearson = stats::pearson(&global.normalized(), &m.lr.w)?;
    Ok(SensitivityRun { global, by_type, coefficient_pearson })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityRun {
    pub lr: MonotonicityCurve,
    pub tt: MonotonicityCurve,
}

pub fn monotonicity_run(cfg: &ExperimentConfig, m: &InterpretModels) -> Result<MonotonicityRun> {
    let i = &cfg.interpret;
    let s = seed::derive(cfg.seed, "monotonicity", &[]);
    Ok(MonotonicityRun {
        lr: monotonicity_curve(&m.lr, &m.data, i.curve_bins, i.bootstrap, s)?,
        tt: monotonicity_curve(&m.tt, &m.data, i.curve_bins, i.bootstrap, s)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceTrial {
    pub true_cohort: usize,
    pub predicted: usize,
    pub membership: Vec<f64>,
    /// Served values outside the display map's range.
    pub clamped: usize,
    pub queries: usize,
}

/// Served-model attack: a vanilla LR trained on one cohort is exposed
/// through the prediction endpoint. The adversary inverts the known display
/// map, recovers the coefficients from the rounded responses and feeds them
/// to a white-box adversary trained on canonicalized shadow LRs. Trials
/// rotate the true cohort.
pub fn interface_attack(cfg: &ExperimentConfig, cohorts: &[Cohort], trials: usize, opts: &ServeOptions) -> Result<Vec<InterfaceTrial>> {
    opts.validate()?;
    if cohorts.iter().any(|c| c.data.features() != FEATURES) {
        return Err(Error::Shape("the endpoint serves the cohort schema".into()));
    }
    let group = TYPE_OFFSET..TYPE_OFFSET + CANCER_TYPES;
    let family = Family::Lr(Mechanism::Vanilla);
    let probes = probes(cfg, cohorts)?;
    let plan = shadow_plan(cfg, cohorts.len(), vec![AccessLevel::Wb]);
    let shadow_seed = seed::derive(cfg.seed, "interface/shadow", &[]);
    let corpus = build_shadow_corpus(cohorts, &shadow_jobs(&family, cfg), &plan, &probes.rows, shadow_seed)?.remove(0);
    let canon = |p: &[f64]| canonicalize(p, group.clone());
    let feats = corpus.features.iter().map(|f| canon(f)).collect::<Result<Vec<_>>>()?;
    let adversary = Adversary::train(&feats, &corpus.labels, &cfg.attack.adversary, seed::derive(cfg.seed, "interface/adversary", &[]))?;

    // public statistics of the continuous block put the search on a unit scale
    let pooled = cohorts::union(cohorts, &(0..cohorts.len()).collect::<Vec<_>>())?.data;
    let fitted = Standardizer::fit(&pooled);
    let (mut mu, mut sd) = (vec![0.0; FEATURES], vec![1.0; FEATURES]);
    mu[..TYPE_OFFSET].copy_from_slice(&fitted.mu[..TYPE_OFFSET]);
    sd[..TYPE_OFFSET].copy_from_slice(&fitted.sigma[..TYPE_OFFSET]);
    let scale = Standardizer::new(mu, sd)?;
    let calibration: Vec<(f64, f64)> = opts.display_map.clone().unwrap_or_else(|| vec![(0.0, 0.0), (1.0, 1.0)]);

    (0..trials)
        .map(|t| {
            let truth = t % cohorts.len();
            let s = seed::derive(cfg.seed, "interface/target", &[t as u64]);
            let target = train_target(&family, cfg, t, &cohorts[truth].data, s)?;
            let model: Arc<dyn Scorer> = Arc::new(target);
            let server = Server::start(model, opts.clone(), "127.0.0.1:0")?;
            let oracle = RemoteOracle::new(server.url());
            let clamped = std::sync::atomic::AtomicUsize::new(0);
            let queries = std::sync::atomic::AtomicUsize::new(0);
            let query = |z: &[f64]| -> Result<f64> {
                queries.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let inv = invert_monotone_map(&calibration, oracle.query(&scale.inverse(z))?)?;
                if inv.clamped {
                    clamped.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                }
                Ok(inv.score)
            };
            let rcfg = RecoveryConfig { one_hot: Some(group.clone()), seed: seed::derive(s, "recovery", &[]), ..RecoveryConfig::default() };
            let recovered = recover_lr_coeffs(&query, FEATURES, &rcfg);
            server.shutdown();
            let recovered = recovered?;
            let (w, b) = scale.rescale_linear(&recovered.w, recovered.b);
            let mut params = w;
            params.push(b);
            let membership = adversary.predict_proba(&canon(&params)?)?;
            let predicted = (0..membership.len()).max_by(|&a, &b| membership[a].total_cmp(&membership[b])).expect("labels");
            Ok(InterfaceTrial {
                true_cohort: truth,
                predicted,
                membership,
                clamped: clamped.into_inner(),
                queries: queries.into_inner(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_keys_round_trip() {
        let cfg = ExperimentConfig::default();
        let all = families(
            &["lr-vanilla", "lr-averaged", "mlp-vanilla", "tt-lr", "tt-mlp", "dp-lr", "dp-sgd"].map(String::from),
            &cfg,
        )
        .unwrap();
        assert_eq!(all.len(), 2 + 1 + 3 + 3 + 4 + 4);
        for f in &all {
            assert_eq!(expand_family(&f.key(), &cfg).unwrap(), vec![*f], "{}", f.key());
        }
        assert_eq!(expand_family("lr-averaged", &cfg).unwrap(), vec![Family::Lr(Mechanism::Averaged { j: 20, k: 3 })]);
        for bad in ["tt-lr-b1", "dp-lr-eps0", "lr-bagged", "svm"] {
            assert!(expand_family(bad, &cfg).is_err(), "{bad}");
        }
    }

    #[test]
    fn labels_name_model_and_defense() {
        assert_eq!(Family::TtLr(2).defense(), "TT b=2");
        assert_eq!(Family::DpSgd(5.0).model(), "NN");
        assert!(Family::DpSgd(0.0).defense().contains('∞'));
    }

    #[test]
    fn tiny_attack_run_is_reproducible() {
        let mut cfg = ExperimentConfig::default();
        cfg.attack.replicates = 2;
        cfg.attack.repeats = 1;
        cfg.attack.folds = 2;
        cfg.attack.probes = 10;
        cfg.attack.adversary.epochs = 5;
        cfg.attack.access = vec![AccessLevel::Sbb, AccessLevel::Wb];
        let cohorts = cfg.load_cohorts().unwrap();
        let fams = [Family::Lr(Mechanism::Vanilla)];
        let (a, runs, _) = attack_table(&cfg, &cohorts, &fams).unwrap();
        let (b, _, _) = attack_table(&cfg, &cohorts, &fams).unwrap();
        assert_eq!(a.render(), b.render());
        assert_eq!(runs[0].corpora[1].feature_len(), FEATURES + 1);
        assert_eq!(runs[0].corpora[0].len(), 2 * 6 * 2);
    }
}

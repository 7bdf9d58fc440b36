//! Command-line front end. Every command writes content-addressed artifacts
//! and a manifest under the output directory.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::artifacts::{ArtifactRef, ArtifactStore, Manifest};
use super::config::ExperimentConfig;
use super::experiments::{
    attack_table, families, interpret_models, monotonicity_run, sensitivity_run, tensorize_config, train_target,
    utility_table, FamilyRun, InterpretModels, Probes,
};
use super::serve::{Server, ServeOptions};
use super::table::ScoreTable;
use crate::cohorts::{self, write_csv_to, Cohort};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::interpret::{feature_sensitivity, monotonicity_curve, sensitivity_by_type, SensitivityConfig, SensitivityReport};
use crate::predictors::{eval_metrics, Model};
use crate::privacy::{AccessLevel, Target};
use crate::seed;
use crate::tensorize::{tensorize_model, BlackBox};
use crate::tt::TensorTrain;

/// Environment variable that overrides `--out`.
pub const OUT_ENV: &str = "TTSHIELD_OUT";
const DEFAULT_OUT: &str = "ttshield-out";

#[derive(Debug, Parser)]
#[command(name = "ttshield", version, about = "Train, tensorize and audit clinical binary classifiers")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment configuration (TOML, or JSON by extension).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory; TTSHIELD_OUT takes precedence.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for independent jobs.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Construction bins of tensorized targets.
    #[arg(long, global = true, value_delimiter = ',', value_name = "B,..")]
    pub bins: Option<Vec<usize>>,
    /// Privacy budgets of DP-LR targets.
    #[arg(long, global = true, value_delimiter = ',', value_name = "EPS,..")]
    pub eps: Option<Vec<f64>>,
    /// Adversary access levels (wbbB, sbb, wb).
    #[arg(long, global = true, value_delimiter = ',', value_name = "LEVEL,..")]
    pub access: Option<Vec<AccessLevel>>,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic cohorts and held-out rows.
    Gen,
    /// Train one target on a union of cohorts.
    Train(TrainArgs),
    /// Tensorize a trained model from discretized queries.
    Tensorize(TensorizeArgs),
    /// Shadow-model membership attack across access levels.
    Attack(TargetArgs),
    /// Attack and utility of defended targets.
    Defend(DefendArgs),
    /// Single-feature sensitivities of a tensor train.
    Sensitivity(InterpretArgs),
    /// Observed response rate against predicted score.
    Monotonicity(InterpretArgs),
    /// Serve a model or tensor train over HTTP.
    Serve(ServeArgs),
    /// Print score tables written by `attack` or `defend`.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Target family, e.g. lr-vanilla, lr-averaged, mlp-vanilla, tt-lr-b2, dp-lr-eps1.
    #[arg(long, default_value = "lr-vanilla")]
    pub family: String,
    /// Cohorts (1-based) forming the training union; all when omitted.
    #[arg(long, value_delimiter = ',')]
    pub union: Option<Vec<usize>>,
    /// Hyperparameter grid entry.
    #[arg(long, default_value_t = 0)]
    pub grid: usize,
}

#[derive(Debug, Args)]
pub struct TensorizeArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Cohorts (1-based) supplying pivots; all when omitted.
    #[arg(long, value_delimiter = ',')]
    pub union: Option<Vec<usize>>,
    /// Discretize construction queries to this many bins; raw scores when omitted.
    #[arg(long)]
    pub query_bins: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TargetArgs {
    /// Target families; the configured list when omitted.
    #[arg(long, value_delimiter = ',')]
    pub targets: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct DefendArgs {
    #[command(flatten)]
    pub targets: TargetArgs,
    /// Training draws averaged in the utility table.
    #[arg(long, default_value_t = 5)]
    pub draws: usize,
}

#[derive(Debug, Args)]
pub struct InterpretArgs {
    /// Tensor train (or, for monotonicity, model) JSON; built from the
    /// configured cohort when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Cohort CSV evaluated with `--input`.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Model or tensor-train JSON.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub decimals: Option<u32>,
    #[arg(long)]
    pub bind: Option<String>,
    /// JSON list of [score, displayed] points.
    #[arg(long)]
    pub display_map: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Score-table JSON files; the newest `attack`/`defend` manifests when omitted.
    pub tables: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
}

/// Parse arguments, run, and map the outcome to an exit code. Errors are
/// reported as one JSON line on stderr.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            report_error("usage", first);
            return 2;
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            if matches!(e, Error::Argument(_) | Error::Config(_)) {
                2
            } else {
                1
            }
        }
    }
}

fn report_error(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{line}");
}

/// Resolve the configuration: file, then flags on top.
pub fn resolve_config(g: &GlobalArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(w) = g.workers {
        cfg.workers = Some(w);
    }
    if let Some(b) = &g.bins {
        cfg.tensorize.bins = b.clone();
    }
    if let Some(e) = &g.eps {
        cfg.defenses.eps = e.clone();
    }
    if let Some(a) = &g.access {
        cfg.attack.access = a.clone();
    }
    cfg.out = Some(output_dir(g.out.as_deref(), cfg.out.as_deref()));
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(flag: Option<&Path>, configured: Option<&Path>) -> PathBuf {
    match std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        Some(v) => PathBuf::from(v),
        None => flag.or(configured).map_or_else(|| PathBuf::from(DEFAULT_OUT), Path::to_path_buf),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli.global)?;
    if let Some(w) = cfg.workers {
        if w == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if rayon::ThreadPoolBuilder::new().num_threads(w).build_global().is_err() {
            log::debug!("worker pool already initialized");
        }
    }
    let store = ArtifactStore::open(cfg.out.clone().expect("resolved"))?;
    let manifest = match cli.command {
        Command::Gen => gen(&cfg, &store)?,
        Command::Train(a) => train(&cfg, &store, &a)?,
        Command::Tensorize(a) => tensorize(&cfg, &store, &a)?,
        Command::Attack(a) => attack(&cfg, &store, &a)?,
        Command::Defend(a) => defend(&cfg, &store, &a)?,
        Command::Sensitivity(a) => sensitivity(&cfg, &store, &a)?,
        Command::Monotonicity(a) => monotonicity(&cfg, &store, &a)?,
        Command::Serve(a) => return serve(&cfg, &a),
        Command::Report(a) => report(&cfg, &store, &a)?,
    };
    let r = store.write_manifest(&manifest)?;
    println!("manifest {}", store.resolve(&r).display());
    Ok(())
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn gen(cfg: &ExperimentConfig, store: &ArtifactStore) -> Result<Manifest> {
    let mut m = Manifest::new("gen", cfg);
    m.seed("cohorts", cfg.seed);
    let cohorts = cfg.load_cohorts()?;
    let (_, holdout) = cfg.holdout(&cohorts)?;
    for c in cohorts.iter().chain(&holdout) {
        let kind = if c.name.ends_with("_holdout") { "holdout" } else { "cohort" };
        let r = m.add(store.put(kind, "csv", &csv_bytes(|b| write_csv_to(c, b))?)?);
        println!("{} {} rows -> {}", c.name, c.len(), store.resolve(&r).display());
    }
    Ok(m)
}

fn select_union(cohorts: &[Cohort], union: Option<&[usize]>) -> Result<Dataset> {
    let members: Vec<usize> = match union {
        None => (0..cohorts.len()).collect(),
        Some(u) => u
            .iter()
            .map(|&k| {
                k.checked_sub(1)
                    .filter(|&i| i < cohorts.len())
                    .ok_or_else(|| Error::Argument(format!("cohort {k} outside 1..={}", cohorts.len())))
            })
            .collect::<Result<_>>()?,
    };
    Ok(cohorts::union(cohorts, &members)?.data)
}

fn pooled(cohorts: &[Cohort]) -> Result<Dataset> {
    select_union(cohorts, None)
}

fn write_target(store: &ArtifactStore, m: &mut Manifest, target: &Target) -> Result<ArtifactRef> {
    Ok(match target {
        Target::Model(model) => m.add(store.put("model", "json", model.to_json()?.as_bytes())?),
        Target::Tt(tt) => m.add(store.put("tt", "json", tt.to_json()?.as_bytes())?),
    })
}

fn train(cfg: &ExperimentConfig, store: &ArtifactStore, a: &TrainArgs) -> Result<Manifest> {
    let mut m = Manifest::new("train", cfg);
    let fams = families(std::slice::from_ref(&a.family), cfg)?;
    let [family] = fams.as_slice() else {
        return Err(Error::Argument(format!("{:?} names {} targets; pick one", a.family, fams.len())));
    };
    let cohorts = cfg.load_cohorts()?;
    let (train_c, holdout) = cfg.holdout(&cohorts)?;
    let data = select_union(&train_c, a.union.as_deref())?;
    let s = m.seed("train", seed::derive(cfg.seed, &format!("train/{}", family.key()), &[a.grid as u64]));
    let target = train_target(family, cfg, a.grid, &data, s)?;
    let r = write_target(store, &mut m, &target)?;
    let metrics = eval_metrics(&target, &pooled(&holdout)?)?;
    m.add(store.put_json("metrics", &serde_json::json!({ "family": family.key(), "holdout": metrics }))?);
    println!(
        "{} -> {} (held-out balanced accuracy {:.3}, AUC {:.3})",
        family.key(),
        store.resolve(&r).display(),
        metrics.balanced_accuracy,
        metrics.auc
    );
    Ok(m)
}

/// A model or tensor-train JSON document.
pub fn load_target(path: &Path) -> Result<Target> {
    let text = std::fs::read_to_string(path)?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    if v.get("cores").is_some() {
        Ok(Target::Tt(TensorTrain::from_json(&text)?))
    } else {
        Ok(Target::Model(Model::from_json(&text)?))
    }
}

fn tensorize(cfg: &ExperimentConfig, store: &ArtifactStore, a: &TensorizeArgs) -> Result<Manifest> {
    let mut m = Manifest::new("tensorize", cfg);
    m.input(&a.model)?;
    let Target::Model(model) = load_target(&a.model)? else {
        return Err(Error::Argument("input is already a tensor train".into()));
    };
    let access = a.query_bins.map_or(BlackBox::Sbb, BlackBox::Wbb);
    let cohorts = cfg.load_cohorts()?;
    let data = select_union(&cohorts, a.union.as_deref())?;
    let tcfg = tensorize_config(cfg, matches!(model, Model::Lr(_)), access);
    let s = m.seed("tensorize", seed::derive(cfg.seed, "tensorize", &[]));
    let t = tensorize_model(&model, &data, &tcfg, s)?;
    let r = write_target(store, &mut m, &Target::Tt(t.tt.clone()))?;
    let fidelity = data
        .rows()
        .map(|x| Ok((t.tt.classify(x)? - crate::predictors::Scorer::score(&model, x)?).abs()))
        .collect::<Result<Vec<f64>>>()?;
    m.add(store.put_json(
        "tensorize-report",
        &serde_json::json!({
            "config": tcfg,
            "params": t.tt.param_count(),
            "ranks": t.tt.ranks(),
            "effective_ranks": t.report.effective_ranks,
            "queries": t.report.queries,
            "distinct_scores": t.distinct_scores,
            "pivots": t.pivots,
            "max_abs_deviation": fidelity.iter().cloned().fold(0.0, f64::max),
        }),
    )?);
    println!("{} parameters, {} queries -> {}", t.tt.param_count(), t.report.queries, store.resolve(&r).display());
    Ok(m)
}

fn record_attack(store: &ArtifactStore, m: &mut Manifest, runs: &[FamilyRun], probes: &Probes, levels: &[AccessLevel]) -> Result<()> {
    m.seed("probes", probes.seed);
    let mut index = Vec::new();
    for run in runs {
        m.seed(format!("shadow/{}", run.family.key()), run.shadow_seed);
        for (level, corpus) in levels.iter().zip(&run.corpora) {
            let r = m.add(store.put("corpus", "csv", &csv_bytes(|b| corpus.write_csv_to(b))?)?);
            index.push(serde_json::json!({
                "family": run.family.key(),
                "access": level,
                "records": corpus.len(),
                "failures": corpus.failures,
                "path": r.path,
            }));
        }
    }
    m.add(store.put_json(
        "corpus-index",
        &serde_json::json!({ "probe_ids": probes.ids, "probe_seed": probes.seed, "corpora": index }),
    )?);
    Ok(())
}

fn write_table(store: &ArtifactStore, m: &mut Manifest, table: &ScoreTable) -> Result<()> {
    m.add(store.put_json("scores", table)?);
    m.add(store.put("scores", "csv", &csv_bytes(|b| table.write_csv_to(b))?)?);
    m.add(store.put("table", "txt", table.render().as_bytes())?);
    Ok(())
}

fn attack(cfg: &ExperimentConfig, store: &ArtifactStore, a: &TargetArgs) -> Result<Manifest> {
    let mut m = Manifest::new("attack", cfg);
    let fams = families(a.targets.as_ref().unwrap_or(&cfg.attack.targets), cfg)?;
    let cohorts = cfg.load_cohorts()?;
    let (table, runs, probes) = attack_table(cfg, &cohorts, &fams)?;
    record_attack(store, &mut m, &runs, &probes, &cfg.attack.access)?;
    write_table(store, &mut m, &table)?;
    print!("{}", table.render());
    Ok(m)
}

fn defend(cfg: &ExperimentConfig, store: &ArtifactStore, a: &DefendArgs) -> Result<Manifest> {
    let mut m = Manifest::new("defend", cfg);
    let defended = families(a.targets.targets.as_ref().unwrap_or(&cfg.defenses.targets), cfg)?;
    let cohorts = cfg.load_cohorts()?;
    let (table, runs, probes) = attack_table(cfg, &cohorts, &defended)?;
    record_attack(store, &mut m, &runs, &probes, &cfg.attack.access)?;
    write_table(store, &mut m, &table)?;

    let mut names: Vec<String> = ["lr-vanilla", "mlp-vanilla", "tt-lr", "tt-mlp"].map(String::from).to_vec();
    names.extend(defended.iter().map(|f| f.key()));
    let (train_c, holdout) = cfg.holdout(&cohorts)?;
    let utility = utility_table(cfg, &train_c, &holdout, &families(&names, cfg)?, a.draws)?;
    m.add(store.put_json("utility", &utility)?);
    m.add(store.put("utility", "txt", utility.render().as_bytes())?);
    print!("{}\n{}", table.render(), utility.render());
    Ok(m)
}

fn interpret_input(cfg: &ExperimentConfig, a: &InterpretArgs, m: &mut Manifest) -> Result<Option<(Target, Dataset)>> {
    match (&a.input, &a.data) {
        (None, None) => Ok(None),
        (Some(i), d) => {
            m.input(i)?;
            let target = load_target(i)?;
            let data = match d {
                Some(d) => {
                    m.input(d)?;
                    cohorts::load_csv(d)?.data
                }
                None => {
                    let cohorts = cfg.load_cohorts()?;
                    cohorts
                        .get(cfg.interpret.cohort)
                        .ok_or_else(|| Error::Config(format!("interpretation cohort {} does not exist", cfg.interpret.cohort)))?
                        .data
                        .clone()
                }
            };
            Ok(Some((target, data)))
        }
        (None, Some(_)) => Err(Error::Argument("--data needs --input".into())),
    }
}

fn combined_csv(reports: &[&SensitivityReport]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        let part = csv_bytes(|b| r.write_csv_to(b))?;
        let skip = if i == 0 { 0 } else { part.iter().position(|&c| c == b'\n').map_or(part.len(), |p| p + 1) };
        out.extend_from_slice(&part[skip..]);
    }
    Ok(out)
}

fn built_models(cfg: &ExperimentConfig, m: &mut Manifest) -> Result<InterpretModels> {
    m.seed("interpret/lr", seed::derive(cfg.seed, "interpret/lr", &[]));
    m.seed("interpret/tt", seed::derive(cfg.seed, "interpret/tt", &[]));
    interpret_models(cfg, &cfg.load_cohorts()?)
}

fn sensitivity(cfg: &ExperimentConfig, store: &ArtifactStore, a: &InterpretArgs) -> Result<Manifest> {
    let mut m = Manifest::new("sensitivity", cfg);
    match interpret_input(cfg, a, &mut m)? {
        Some((target, data)) => {
            let Target::Tt(tt) = target else {
                return Err(Error::Argument("sensitivities need a tensor train".into()));
            };
            let scfg = SensitivityConfig::from_data(&tt, &data)?;
            let global = feature_sensitivity(&tt, &scfg, "tt")?;
            let mut reports = vec![global];
            if tt.num_inputs() == cohorts::FEATURES {
                for t in 0..cohorts::CANCER_TYPES {
                    reports.push(sensitivity_by_type(&tt, &scfg, t, "tt")?);
                }
            }
            m.add(store.put("sensitivity", "csv", &combined_csv(&reports.iter().collect::<Vec<_>>())?)?);
            m.add(store.put_json("sensitivity", &reports)?);
            print_sensitivity(&reports[0]);
        }
        None => {
            let models = built_models(cfg, &mut m)?;
            let run = sensitivity_run(&models)?;
            let mut all = vec![&run.global];
            all.extend(run.by_type.iter());
            m.add(store.put("sensitivity", "csv", &combined_csv(&all)?)?);
            m.add(store.put_json("sensitivity", &run)?);
            m.add(store.put("tt", "json", models.tt.to_json()?.as_bytes())?);
            m.add(store.put("model", "json", Model::Lr(models.lr.clone()).to_json()?.as_bytes())?);
            print_sensitivity(&run.global);
            println!("pearson with LR coefficients {:.4}", run.coefficient_pearson);
        }
    }
    Ok(m)
}

fn print_sensitivity(r: &SensitivityReport) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{:<16} {:>12} {:>12}", "feature", "raw", "normalized");
    for e in &r.entries {
        let _ = writeln!(out, "{:<16} {:>12.6} {:>12.4}", e.feature, e.raw, e.normalized);
    }
}

fn monotonicity(cfg: &ExperimentConfig, store: &ArtifactStore, a: &InterpretArgs) -> Result<Manifest> {
    let mut m = Manifest::new("monotonicity", cfg);
    let i = &cfg.interpret;
    let s = m.seed("monotonicity", seed::derive(cfg.seed, "monotonicity", &[]));
    let curves = match interpret_input(cfg, a, &mut m)? {
        Some((target, data)) => vec![("input", monotonicity_curve(&target, &data, i.curve_bins, i.bootstrap, s)?)],
        None => {
            let models = built_models(cfg, &mut m)?;
            let run = monotonicity_run(cfg, &models)?;
            vec![("lr", run.lr), ("tt", run.tt)]
        }
    };
    for (name, c) in &curves {
        m.add(store.put("curve", "csv", &csv_bytes(|b| c.write_csv_to(b))?)?);
        m.add(store.put("curve", "svg", c.to_svg(&format!("{name} response rate by score")).as_bytes())?);
        m.add(store.put_json("curve", c)?);
        println!("{name}: slope {:.4}, intercept {:.4}, {} occupied bins", c.slope, c.intercept, c.bins.len());
    }
    Ok(m)
}

fn serve(cfg: &ExperimentConfig, a: &ServeArgs) -> Result<()> {
    let target = load_target(&a.input)?;
    let display_map = match &a.display_map {
        Some(p) => Some(serde_json::from_str(&std::fs::read_to_string(p)?)?),
        None => cfg.serve.display_map.clone(),
    };
    let opts = ServeOptions { decimals: a.decimals.unwrap_or(cfg.serve.decimals), display_map, threads: cfg.serve.threads };
    let bind = a.bind.clone().unwrap_or_else(|| cfg.serve.bind.clone());
    let server = Server::start(Arc::new(target), opts, &bind)?;
    println!("listening on {}", server.url());
    server.join();
    Ok(())
}

/// Score tables referenced by the newest manifests of table-producing
/// commands, in file-name order.
fn discover_tables(store: &ArtifactStore) -> Result<Vec<PathBuf>> {
    let dir = store.root().join("manifest");
    let mut tables = Vec::new();
    if !dir.exists() {
        return Ok(tables);
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    paths.sort();
    for p in paths {
        let man: Manifest = serde_json::from_str(&std::fs::read_to_string(&p)?)?;
        if man.command == "attack" || man.command == "defend" {
            for r in man.artifacts.iter().filter(|r| r.kind == "scores" && r.path.ends_with(".json")) {
                let path = store.resolve(r);
                if !tables.contains(&path) {
                    tables.push(path);
                }
            }
        }
    }
    Ok(tables)
}

fn report(cfg: &ExperimentConfig, store: &ArtifactStore, a: &ReportArgs) -> Result<Manifest> {
    let mut m = Manifest::new("report", cfg);
    let paths = if a.tables.is_empty() { discover_tables(store)? } else { a.tables.clone() };
    if paths.is_empty() {
        return Err(Error::Argument("no score tables given or found".into()));
    }
    let mut tables = Vec::new();
    for p in &paths {
        m.input(p)?;
        tables.push(serde_json::from_str::<ScoreTable>(&std::fs::read_to_string(p)?)?);
    }
    let merged = ScoreTable::merge(&tables)?;
    let text = merged.render();
    m.add(store.put("report", "txt", text.as_bytes())?);
    match a.format {
        ReportFormat::Text => print!("{text}"),
        ReportFormat::Csv => print!("{}", String::from_utf8_lossy(&csv_bytes(|b| merged.write_csv_to(b))?)),
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&merged)?),
    }
    Ok(m)
}

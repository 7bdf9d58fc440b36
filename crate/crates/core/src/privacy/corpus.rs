//! Shadow-model corpora: records of (access-derived features, multi-hot
//! membership label).

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::access::{access, AccessLevel, Accessible};
use crate::cohorts::{self, Cohort};
use crate::data::Dataset;
use crate::error::{argument, shape, Error, Result};
use crate::predictors::{Model, Scorer};
use crate::seed;
use crate::tt::TensorTrain;

/// Artifact released by a training pipeline.
#[derive(Debug, Clone)]
pub enum Target {
    Model(Model),
    Tt(TensorTrain),
}

impl Scorer for Target {
    fn score(&self, x: &[f64]) -> Result<f64> {
        match self {
            Target::Model(m) => m.score(x),
            Target::Tt(t) => t.classify(x),
        }
    }
}

impl Accessible for Target {
    fn wb_params(&self) -> Option<Vec<f64>> {
        match self {
            Target::Model(m) => Some(m.params()),
            Target::Tt(t) => Some(t.flatten()),
        }
    }
}

type MakeFn<'a> = dyn Fn(&Dataset, u64) -> Result<Target> + Send + Sync + 'a;

/// One training configuration of the shadow grid.
pub struct ShadowJob<'a> {
    pub name: String,
    pub make: Box<MakeFn<'a>>,
}

impl<'a> ShadowJob<'a> {
    pub fn new(name: impl Into<String>, make: impl Fn(&Dataset, u64) -> Result<Target> + Send + Sync + 'a) -> Self {
        ShadowJob { name: name.into(), make: Box::new(make) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub job: String,
    pub union: String,
    pub replicate: usize,
    pub seed: u64,
    pub access: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub job: String,
    pub union: String,
    pub replicate: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttackCorpus {
    pub provenance: Vec<Provenance>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Vec<u8>>,
    pub failures: Vec<Failure>,
}

impl AttackCorpus {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_len(&self) -> usize {
        self.features.first().map(|f| f.len()).unwrap_or(0)
    }

    pub fn label_len(&self) -> usize {
        self.labels.first().map(|l| l.len()).unwrap_or(0)
    }

    pub fn push(&mut self, prov: Provenance, features: Vec<f64>, label: Vec<u8>) -> Result<()> {
        if !self.is_empty() && (features.len() != self.feature_len() || label.len() != self.label_len()) {
            return shape("record length differs from the corpus");
        }
        self.provenance.push(prov);
        self.features.push(features);
        self.labels.push(label);
        Ok(())
    }

    /// Copy with every feature vector passed through `f`.
    pub fn map_features(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> AttackCorpus {
        AttackCorpus { features: self.features.iter().map(|x| f(x)).collect(), ..self.clone() }
    }

    /// Copy keeping the records whose index satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> AttackCorpus {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        AttackCorpus {
            provenance: idx.iter().map(|&i| self.provenance[i].clone()).collect(),
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
            failures: self.failures.clone(),
        }
    }

    /// Columnar CSV: provenance columns, `f0..fK`, `l0..lM`.
    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["job", "union", "replicate", "seed", "access"].iter().map(|s| s.to_string()).collect();
        header.extend((0..self.feature_len()).map(|k| format!("f{k}")));
        header.extend((0..self.label_len()).map(|m| format!("l{m}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let p = &self.provenance[i];
            let mut rec = vec![p.job.clone(), p.union.clone(), p.replicate.to_string(), p.seed.to_string(), p.access.clone()];
            rec.extend(self.features[i].iter().map(|v| format!("{v}")));
            rec.extend(self.labels[i].iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<AttackCorpus> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        let nf = header.iter().filter(|h| h.starts_with('f') && h[1..].parse::<usize>().is_ok()).count();
        let nl = header.iter().filter(|h| h.starts_with('l') && h[1..].parse::<usize>().is_ok()).count();
        if header.len() != 5 + nf + nl {
            return Err(Error::Parse { row: 0, column: "header".into(), message: "unexpected corpus columns".into() });
        }
        let mut c = AttackCorpus::default();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |col: &str, msg: &str| Error::Parse { row: i + 1, column: col.into(), message: msg.into() };
            let prov = Provenance {
                job: rec[0].to_string(),
                union: rec[1].to_string(),
                replicate: rec[2].parse().map_err(|_| bad("replicate", "not an integer"))?,
                seed: rec[3].parse().map_err(|_| bad("seed", "not an integer"))?,
                access: rec[4].to_string(),
            };
            let f = (0..nf)
                .map(|k| rec[5 + k].parse::<f64>().map_err(|_| bad(&header[5 + k], "not a number")))
                .collect::<Result<Vec<_>>>()?;
            let l = (0..nl)
                .map(|m| match &rec[5 + nf + m] {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    _ => Err(bad(&header[5 + nf + m], "label must be 0 or 1")),
                })
                .collect::<Result<Vec<_>>>()?;
            c.push(prov, f, l)?;
        }
        Ok(c)
    }
}

/// Probe samples drawn uniformly without replacement from the pooled
/// cohorts; returns `(cohort, row)` ids and the rows.
pub fn select_probes(cohorts: &[Cohort], count: usize, seed_value: u64) -> Result<(Vec<(usize, usize)>, Vec<Vec<f64>>)> {
    let ids: Vec<(usize, usize)> = cohorts
        .iter()
        .enumerate()
        .flat_map(|(m, c)| (0..c.len()).map(move |i| (m, i)))
        .collect();
    if count > ids.len() {
        return argument(format!("{count} probes requested from {} pooled samples", ids.len()));
    }
    let pick = rand::seq::index::sample(&mut seed::rng(seed_value), ids.len(), count).into_vec();
    let chosen: Vec<(usize, usize)> = pick.into_iter().map(|k| ids[k]).collect();
    let rows = chosen.iter().map(|&(m, i)| cohorts[m].data.row(i).to_vec()).collect();
    Ok((chosen, rows))
}

#[derive(Debug, Clone)]
pub struct ShadowPlan {
    pub unions: Vec<Vec<usize>>,
    pub replicates: usize,
    pub levels: Vec<AccessLevel>,
}

/// Train every (job, union, replicate) target once and extract one corpus
/// per access level, in the order of `plan.levels`. Training failures are
/// recorded in each corpus and the record is skipped.
pub fn build_shadow_corpus(
    cohorts: &[Cohort],
    jobs: &[ShadowJob<'_>],
    plan: &ShadowPlan,
    probes: &[Vec<f64>],
    seed_value: u64,
) -> Result<Vec<AttackCorpus>> {
    if plan.replicates == 0 || jobs.is_empty() || plan.unions.is_empty() {
        return argument("shadow corpus needs replicates, jobs and unions");
    }
    let unions = plan
        .unions
        .iter()
        .map(|u| cohorts::union(cohorts, u))
        .collect::<Result<Vec<_>>>()?;
    let tasks: Vec<(usize, usize, usize)> = (0..jobs.len())
        .flat_map(|j| (0..unions.len()).flat_map(move |u| (0..plan.replicates).map(move |r| (j, u, r))))
        .collect();
    let results: Vec<(u64, std::result::Result<Vec<Vec<f64>>, String>)> = tasks
        .par_iter()
        .map(|&(j, u, r)| {
            let s = seed::derive(seed_value, "shadow", &[j as u64, u as u64, r as u64]);
            let out = (jobs[j].make)(&unions[u].data, s).and_then(|target| {
                plan.levels.iter().map(|&l| access(&target, l, probes)).collect::<Result<Vec<_>>>()
            });
            (s, out.map_err(|e| e.to_string()))
        })
        .collect();

    let mut corpora = vec![AttackCorpus::default(); plan.levels.len()];
    for (&(j, u, r), (s, out)) in tasks.iter().zip(results) {
        let union_label = unions[u].label_string();
        match out {
            Ok(feats) => {
                for ((c, f), l) in corpora.iter_mut().zip(feats).zip(&plan.levels) {
                    let prov = Provenance {
                        job: jobs[j].name.clone(),
                        union: union_label.clone(),
                        replicate: r,
                        seed: s,
                        access: l.to_string(),
                    };
                    c.push(prov, f, unions[u].indicator.clone())?;
                }
            }
            Err(e) => {
                log::warn!("shadow job {} on union {union_label} replicate {r} failed: {e}", jobs[j].name);
                for c in corpora.iter_mut() {
                    c.failures.push(Failure { job: jobs[j].name.clone(), union: union_label.clone(), replicate: r, error: e.clone() });
                }
            }
        }
    }
    Ok(corpora)
}

//! Turn a black-box predictor into a gauge-randomized tensor train.

pub mod oracle;
pub mod sketch;

pub use oracle::{discretize, predict_query, BlackBox, CountingOracle, ModelOracle, Oracle, RemoteOracle};
pub use sketch::{query_budget, sketch_build, AmplitudeSource, BornSource, FnSource, SketchConfig, SketchReport};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{argument, Result};
use crate::predictors::Scorer;
use crate::seed;
use crate::standardize::Standardizer;
use crate::tt::TensorTrain;

/// Uniform sample of `count` row indices without replacement.
pub fn select_pivots(data: &Dataset, count: usize, seed_value: u64) -> Result<Vec<usize>> {
    if count > data.len() {
        return argument(format!("{count} pivots requested from {} samples", data.len()));
    }
    if count == 0 {
        return argument("at least one pivot is required");
    }
    Ok(index::sample(&mut seed::rng(seed_value), data.len(), count).into_vec())
}

/// Features whose observed values are all 0 or 1.
pub fn detect_binary(data: &Dataset) -> Vec<bool> {
    let p = data.features();
    let mut bin = vec![true; p];
    for row in data.rows() {
        for (b, v) in bin.iter_mut().zip(row) {
            if *v != 0.0 && *v != 1.0 {
                *b = false;
            }
        }
    }
    bin
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorizeConfig {
    pub pivots: usize,
    pub rank: usize,
    pub access: BlackBox,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default = "default_true")]
    pub gauge: bool,
}

fn default_ridge() -> f64 {
    1e-8
}

fn default_true() -> bool {
    true
}

impl TensorizeConfig {
    /// 50 pivots, rank 2.
    pub fn lr(access: BlackBox) -> Self {
        TensorizeConfig { pivots: 50, rank: 2, access, ridge: 1e-8, gauge: true }
    }

    /// 80 pivots, rank 5.
    pub fn mlp(access: BlackBox) -> Self {
        TensorizeConfig { pivots: 80, rank: 5, access, ridge: 1e-8, gauge: true }
    }

    pub fn validate(&self) -> Result<()> {
        self.access.validate()?;
        if self.rank == 0 {
            return argument("rank must be at least 1");
        }
        if self.pivots < self.rank {
            return argument(format!("pivot count {} below rank {}", self.pivots, self.rank));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Tensorized {
    pub tt: TensorTrain,
    pub pivots: Vec<usize>,
    pub report: SketchReport,
    /// Distinct scores returned by the oracle during construction.
    pub distinct_scores: usize,
}

/// Oracle → pivots → sketch → raw-scale rescaling → gauge randomization.
pub fn tensorize_oracle(oracle: &dyn Oracle, union: &Dataset, cfg: &TensorizeConfig, seed_value: u64) -> Result<Tensorized> {
    cfg.validate()?;
    let pivots = select_pivots(union, cfg.pivots, seed::derive(seed_value, "pivots", &[]))?;
    let rows: Vec<Vec<f64>> = pivots.iter().map(|&i| union.row(i).to_vec()).collect();
    let s = Standardizer::fit(union);
    let binary = detect_binary(union);
    let counting = CountingOracle::new(oracle);
    let source = BornSource(&counting);
    let sketch_cfg = SketchConfig { rank: cfg.rank, ridge: cfg.ridge };
    let (tt, report) = sketch_build(&source, &rows, &s, &binary, &sketch_cfg)?;
    debug_assert!(counting.count() <= query_budget(cfg.pivots, union.features()) + cfg.pivots as u64);
    let mut tt = tt.rescale(&s)?;
    if cfg.gauge {
        tt = tt.gauge_randomize(seed::derive(seed_value, "gauge", &[]));
    }
    Ok(Tensorized { tt, pivots, report, distinct_scores: counting.distinct_values() })
}

pub fn tensorize_model(model: &dyn Scorer, union: &Dataset, cfg: &TensorizeConfig, seed_value: u64) -> Result<Tensorized> {
    let oracle = ModelOracle::new(model, cfg.access)?;
    tensorize_oracle(&oracle, union, cfg, seed_value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohorts::{generate_cohorts, preset};
    use crate::predictors::{eval_metrics, lr_train, LrHyper};

    #[test]
    fn pivots_are_reproducible_and_distinct() {
        let d = Dataset::from_rows(&(0..30).map(|i| vec![i as f64]).collect::<Vec<_>>(), vec![0; 30]).unwrap();
        let a = select_pivots(&d, 10, 3).unwrap();
        assert_eq!(a, select_pivots(&d, 10, 3).unwrap());
        let mut s = a.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 10);
        let mut all = select_pivots(&d, 30, 1).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..30).collect::<Vec<_>>());
        assert!(select_pivots(&d, 31, 1).is_err());
    }

    #[test]
    fn tensorized_lr_has_expected_shape_and_fidelity() {
        let cohorts = generate_cohorts(&preset("desk").unwrap(), 1).unwrap();
        let d = &cohorts[0].data;
        let (tr, te) = d.stratified_split(0.8, 1);
        let (train, test) = (d.subset(&tr), d.subset(&te));
        let lr = lr_train(&train, &LrHyper::new(0.5, 1.0), 2).unwrap();
        let t = tensorize_model(&lr, &train, &TensorizeConfig::lr(BlackBox::Wbb(2)), 9).unwrap();
        assert_eq!(t.tt.num_sites(), 22);
        assert_eq!(t.tt.param_count(), 168);
        assert!(t.distinct_scores <= 2);
        assert!(t.report.queries <= query_budget(50, 21) + 50);
        let m_lr = eval_metrics(&lr, &test).unwrap();
        let m_tt = eval_metrics(&t.tt, &test).unwrap();
        assert!(
            (m_lr.balanced_accuracy - m_tt.balanced_accuracy).abs() <= 0.05,
            "lr {:?} tt {:?}",
            m_lr,
            m_tt
        );
    }
}

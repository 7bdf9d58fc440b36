//! Target models: elastic-net logistic regression and small MLPs, training
//! mechanisms, and evaluation metrics.

pub mod logistic;
pub mod mechanism;
pub mod metrics;
pub mod mlp;

pub use logistic::{lr_train, ClassWeight, LogisticModel, LrHyper};
pub use mechanism::{train_mechanism, Arch, Mechanism};
pub use metrics::{auc, balanced_accuracy, eval_metrics, eval_scores, Metrics};
pub use mlp::{mlp_train, MlpHyper, MlpModel};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tt::TensorTrain;

/// Anything that maps a raw feature vector to a class-1 probability.
pub trait Scorer: Send + Sync {
    fn score(&self, x: &[f64]) -> Result<f64>;
}

impl Scorer for LogisticModel {
    fn score(&self, x: &[f64]) -> Result<f64> {
        self.predict(x)
    }
}

impl Scorer for MlpModel {
    fn score(&self, x: &[f64]) -> Result<f64> {
        self.predict(x)
    }
}

impl Scorer for TensorTrain {
    fn score(&self, x: &[f64]) -> Result<f64> {
        self.classify(x)
    }
}

impl<F> Scorer for F
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(self(x))
    }
}

/// Privacy parameters attached to a model trained by a DP mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpRecord {
    /// `None` stands for an unbounded budget.
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
}

/// A trained target model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Model {
    Lr(LogisticModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn features(&self) -> usize {
        match self {
            Model::Lr(m) => m.features(),
            Model::Mlp(m) => m.features(),
        }
    }

    /// Flattened raw-scale parameters (white-box view).
    pub fn params(&self) -> Vec<f64> {
        match self {
            Model::Lr(m) => m.params(),
            Model::Mlp(m) => m.raw_params(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::Lr(_) => "lr",
            Model::Mlp(_) => "mlp",
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Model> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        doc.try_into()
    }
}

impl Scorer for Model {
    fn score(&self, x: &[f64]) -> Result<f64> {
        match self {
            Model::Lr(m) => m.predict(x),
            Model::Mlp(m) => m.predict(x),
        }
    }
}

/// Wire form of a model: `{"type", "params", "standardizer", "hyper", "dp"?}`.
/// LR params are raw-scale `(w, b)`; MLP params are the network acting on
/// standardized inputs, with `sizes` recording the layer chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    #[serde(rename = "type")]
    pub kind: String,
    pub params: Vec<f64>,
    pub standardizer: crate::standardize::Standardizer,
    pub hyper: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dp: Option<DpRecord>,
}

impl From<&Model> for ModelDocument {
    fn from(m: &Model) -> Self {
        match m {
            Model::Lr(lr) => ModelDocument {
                kind: "lr".into(),
                params: lr.params(),
                standardizer: lr.standardizer.clone(),
                hyper: serde_json::to_value(lr.hyper).expect("plain struct"),
                sizes: None,
                dp: lr.dp,
            },
            Model::Mlp(mlp) => ModelDocument {
                kind: "mlp".into(),
                params: mlp.net.params().to_vec(),
                standardizer: mlp.standardizer.clone(),
                hyper: serde_json::to_value(&mlp.hyper).expect("plain struct"),
                sizes: Some(mlp.net.sizes().to_vec()),
                dp: mlp.dp,
            },
        }
    }
}

impl TryFrom<ModelDocument> for Model {
    type Error = crate::error::Error;

    fn try_from(doc: ModelDocument) -> Result<Model> {
        match doc.kind.as_str() {
            "lr" => {
                let mut p = doc.params;
                let b = p.pop().ok_or_else(|| crate::Error::Shape("empty parameter list".into()))?;
                let hyper: LrHyper = serde_json::from_value(doc.hyper)?;
                let mut m = LogisticModel::new(p, b, hyper, doc.standardizer)?;
                m.dp = doc.dp;
                Ok(Model::Lr(m))
            }
            "mlp" => {
                let hyper: MlpHyper = serde_json::from_value(doc.hyper)?;
                let sizes = doc.sizes.unwrap_or_else(|| hyper.sizes(doc.standardizer.len()));
                let net = crate::nn::Mlp::from_params(&sizes, doc.params)?;
                let mut m = MlpModel::new(net, doc.standardizer, hyper)?;
                m.dp = doc.dp;
                Ok(Model::Mlp(m))
            }
            other => Err(crate::Error::Argument(format!("unknown model type {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;

    fn toy() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        let y = (0..40).map(|i| (i > 18) as u8).collect();
        Dataset::from_rows(&rows, y).unwrap()
    }

    #[test]
    fn json_round_trips() {
        let d = toy();
        let lr = Model::Lr(lr_train(&d, &LrHyper::new(0.5, 1.0), 1).unwrap());
        let back = Model::from_json(&lr.to_json().unwrap()).unwrap();
        assert_eq!(back, lr);
        let h = MlpHyper { epochs: 2, ..MlpHyper::default() };
        let mlp = Model::Mlp(mlp_train(&d, &h, 1).unwrap());
        let back = Model::from_json(&mlp.to_json().unwrap()).unwrap();
        assert_eq!(back, mlp);
        let v: serde_json::Value = serde_json::from_str(&lr.to_json().unwrap()).unwrap();
        assert_eq!(v["type"], "lr");
        assert_eq!(v["params"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn logit_order_equals_probability_order() {
        let m = lr_train(&toy(), &LrHyper::default(), 2).unwrap();
        let d = toy();
        let mut by_logit: Vec<usize> = (0..d.len()).collect();
        let mut by_prob = by_logit.clone();
        by_logit.sort_by(|&a, &b| m.logit(d.row(a)).unwrap().total_cmp(&m.logit(d.row(b)).unwrap()));
        by_prob.sort_by(|&a, &b| m.predict(d.row(a)).unwrap().total_cmp(&m.predict(d.row(b)).unwrap()));
        assert_eq!(by_logit, by_prob);
    }
}

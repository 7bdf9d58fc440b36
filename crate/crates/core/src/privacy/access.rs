use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictors::{Model, Scorer};
use crate::tensorize::BlackBox;
use crate::tt::TensorTrain;

/// Adversary access level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AccessLevel {
    /// Discretized scores on a `b`-point grid.
    Wbb(usize),
    Sbb,
    Wb,
}

impl AccessLevel {
    pub fn black_box(&self) -> Option<BlackBox> {
        match *self {
            AccessLevel::Wbb(b) => Some(BlackBox::Wbb(b)),
            AccessLevel::Sbb => Some(BlackBox::Sbb),
            AccessLevel::Wb => None,
        }
    }
}

impl fmt::Display for AccessLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AccessLevel::Wbb(b) => write!(f, "wbb{b}"),
            AccessLevel::Sbb => write!(f, "sbb"),
            AccessLevel::Wb => write!(f, "wb"),
        }
    }
}

impl FromStr for AccessLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "sbb" => Ok(AccessLevel::Sbb),
            "wb" => Ok(AccessLevel::Wb),
            _ => t
                .strip_prefix("wbb")
                .and_then(|b| b.parse::<usize>().ok())
                .filter(|&b| b >= 2)
                .map(AccessLevel::Wbb)
                .ok_or_else(|| Error::Argument(format!("unknown access level {s:?}"))),
        }
    }
}

impl TryFrom<String> for AccessLevel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AccessLevel> for String {
    fn from(l: AccessLevel) -> String {
        l.to_string()
    }
}

impl AccessLevel {
    /// Column header used in score tables.
    pub fn header(&self) -> String {
        match self {
            AccessLevel::Wbb(b) => format!("{b}-WBB"),
            AccessLevel::Sbb => "SBB".into(),
            AccessLevel::Wb => "WB".into(),
        }
    }
}

/// A released artifact the adversary can probe.
pub trait Accessible: Scorer {
    /// Flattened white-box parameters, if the artifact exposes them.
    fn wb_params(&self) -> Option<Vec<f64>>;
}

impl Accessible for Model {
    fn wb_params(&self) -> Option<Vec<f64>> {
        Some(self.params())
    }
}

impl Accessible for TensorTrain {
    fn wb_params(&self) -> Option<Vec<f64>> {
        Some(self.flatten())
    }
}

/// Feature vector seen by an adversary with the given access.
pub fn access(target: &dyn Accessible, level: AccessLevel, probes: &[Vec<f64>]) -> Result<Vec<f64>> {
    match level.black_box() {
        Some(bb) => {
            bb.validate()?;
            probes.iter().map(|x| bb.apply(target.score(x)?)).collect()
        }
        None => target
            .wb_params()
            .ok_or_else(|| Error::Access("white-box access needs model parameters".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::LogisticModel;

    struct Opaque;

    impl Scorer for Opaque {
        fn score(&self, _: &[f64]) -> Result<f64> {
            Ok(0.7)
        }
    }

    impl Accessible for Opaque {
        fn wb_params(&self) -> Option<Vec<f64>> {
            None
        }
    }

    #[test]
    fn black_box_levels_on_a_constant_model() {
        let probes = vec![vec![0.0]; 5];
        assert_eq!(access(&Opaque, AccessLevel::Sbb, &probes).unwrap(), vec![0.7; 5]);
        assert_eq!(access(&Opaque, AccessLevel::Wbb(2), &probes).unwrap(), vec![1.0; 5]);
        assert!(matches!(access(&Opaque, AccessLevel::Wb, &probes), Err(Error::Access(_))));
    }

    #[test]
    fn white_box_lr_is_coefficients_and_intercept() {
        let w: Vec<f64> = (0..21).map(|j| j as f64).collect();
        let m = Model::Lr(LogisticModel::from_coefficients(w.clone(), -3.0).unwrap());
        let v = access(&m, AccessLevel::Wb, &[]).unwrap();
        assert_eq!(v.len(), 22);
        assert_eq!(&v[..21], &w[..]);
        assert_eq!(v[21], -3.0);
    }

    #[test]
    fn level_names_round_trip() {
        for l in [AccessLevel::Wbb(2), AccessLevel::Wbb(10), AccessLevel::Sbb, AccessLevel::Wb] {
            assert_eq!(l.to_string().parse::<AccessLevel>().unwrap(), l);
        }
        assert!("wbb1".parse::<AccessLevel>().is_err());
        assert!("gray".parse::<AccessLevel>().is_err());
    }
}

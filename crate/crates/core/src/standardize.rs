use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{shape, Error, Result};

/// Per-feature affine standardization `x̃ = (x - mu) / sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl Standardizer {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if mu.len() != sigma.len() {
            return shape(format!("{} means but {} deviations", mu.len(), sigma.len()));
        }
        if let Some((j, s)) = sigma.iter().enumerate().find(|(_, s)| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::Domain(format!("sigma[{j}] = {s} must be positive and finite")));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::Domain("non-finite mean".into()));
        }
        Ok(Standardizer { mu, sigma })
    }

    pub fn identity(n: usize) -> Self {
        Standardizer { mu: vec![0.0; n], sigma: vec![1.0; n] }
    }

    /// Population mean and standard deviation per column. Constant columns
    /// get `sigma = 1` and keep their mean, so they become a constant shift.
    pub fn fit(data: &Dataset) -> Self {
        let p = data.features();
        let n = data.len().max(1) as f64;
        let mut mu = vec![0.0; p];
        for row in data.rows() {
            for (m, v) in mu.iter_mut().zip(row) {
                *m += v;
            }
        }
        mu.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; p];
        for row in data.rows() {
            for j in 0..p {
                let d = row[j] - mu[j];
                var[j] += d * d;
            }
        }
        let sigma = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mu, sigma }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.mu.iter().all(|&m| m == 0.0) && self.sigma.iter().all(|&s| s == 1.0)
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mu.iter().zip(&self.sigma))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mu.iter().zip(&self.sigma))
            .map(|(v, (m, s))| m + s * v)
            .collect()
    }

    pub fn transform_dataset(&self, data: &Dataset) -> Dataset {
        let x: Vec<f64> = data.rows().flat_map(|r| self.transform(r)).collect();
        Dataset::new(data.features(), x, data.labels().to_vec()).expect("shape preserved")
    }

    /// Map linear parameters fitted on standardized inputs to parameters that
    /// act on raw inputs: `w_j = w̃_j / sigma_j`, `b = b̃ - Σ w̃_j mu_j / sigma_j`.
    pub fn rescale_linear(&self, w_std: &[f64], b_std: f64) -> (Vec<f64>, f64) {
        let mut b = b_std;
        let w = w_std
            .iter()
            .enumerate()
            .map(|(j, &wj)| {
                b -= wj * self.mu[j] / self.sigma[j];
                wj / self.sigma[j]
            })
            .collect();
        (w, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_column_gets_unit_sigma() {
        let d = Dataset::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0]], vec![0, 1]).unwrap();
        let s = Standardizer::fit(&d);
        assert_eq!(s.mu, vec![2.0, 5.0]);
        assert_eq!(s.sigma, vec![1.0, 1.0]);
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        assert!(Standardizer::new(vec![0.0], vec![0.0]).is_err());
        assert!(Standardizer::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn linear_rescaling_matches_standardized_path() {
        let s = Standardizer::new(vec![4.0, -1.0], vec![2.0, 0.5]).unwrap();
        let (w, b) = s.rescale_linear(&[1.5, -0.25], 0.3);
        let x = [7.0, 2.0];
        let z = s.transform(&x);
        let std_logit = 1.5 * z[0] - 0.25 * z[1] + 0.3;
        let raw_logit = w[0] * x[0] + w[1] * x[1] + b;
        assert!((std_logit - raw_logit).abs() < 1e-12);
    }
}

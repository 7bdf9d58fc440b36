//! Labeled tabular data shared by every trainer.

use crate::error::{shape, Result};
use crate::seed;
use rand::seq::SliceRandom;

/// Row-major design matrix with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: usize,
    x: Vec<f64>,
    y: Vec<u8>,
}

impl Dataset {
    pub fn new(features: usize, x: Vec<f64>, y: Vec<u8>) -> Result<Self> {
        if features == 0 {
            return shape("dataset needs at least one feature");
        }
        if x.len() != features * y.len() {
            return shape(format!(
                "design matrix has {} values, expected {} rows x {} features",
                x.len(),
                y.len(),
                features
            ));
        }
        if let Some(bad) = y.iter().find(|&&v| v > 1) {
            return shape(format!("label {bad} is not binary"));
        }
        Ok(Dataset { features, x, y })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Vec<u8>) -> Result<Self> {
        let features = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != features) {
            return shape("ragged rows");
        }
        let x = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Dataset::new(features, x, y)
    }

    pub fn empty(features: usize) -> Self {
        Dataset { features, x: Vec::new(), y: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.features..(i + 1) * self.features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.features)
    }

    pub fn label(&self, i: usize) -> u8 {
        self.y[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.y
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn positives(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let p = self.positives();
        [self.len() - p, p]
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(idx.len() * self.features);
        let mut y = Vec::with_capacity(idx.len());
        for &i in idx {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Dataset { features: self.features, x, y }
    }

    pub fn push(&mut self, row: &[f64], label: u8) -> Result<()> {
        if row.len() != self.features {
            return shape(format!("row has {} features, expected {}", row.len(), self.features));
        }
        self.x.extend_from_slice(row);
        self.y.push(label);
        Ok(())
    }

    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let features = match parts.first() {
            Some(p) => p.features,
            None => return shape("nothing to concatenate"),
        };
        let mut out = Dataset::empty(features);
        for p in parts {
            if p.features != features {
                return shape("feature counts differ");
            }
            out.x.extend_from_slice(&p.x);
            out.y.extend_from_slice(&p.y);
        }
        Ok(out)
    }

    /// Indices of each class, in row order.
    pub fn class_indices(&self) -> [Vec<usize>; 2] {
        let mut out = [Vec::new(), Vec::new()];
        for (i, &l) in self.y.iter().enumerate() {
            out[l as usize].push(i);
        }
        out
    }

    /// Seeded stratified split; returns (train, held-out) index sets with
    /// `fraction` of each class in the training part.
    pub fn stratified_split(&self, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
        let mut rng = seed::rng(seed);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for mut idx in self.class_indices() {
            idx.shuffle(&mut rng);
            let cut = ((idx.len() as f64) * fraction).round() as usize;
            train.extend_from_slice(&idx[..cut]);
            test.extend_from_slice(&idx[cut..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        (train, test)
    }

    /// Seeded stratified K-fold assignment; returns the fold id of every row.
    pub fn stratified_folds(&self, k: usize, seed: u64) -> Vec<usize> {
        let mut rng = seed::rng(seed);
        let mut fold = vec![0; self.len()];
        let mut offset = 0;
        for mut idx in self.class_indices() {
            idx.shuffle(&mut rng);
            for (pos, i) in idx.into_iter().enumerate() {
                fold[i] = (pos + offset) % k;
            }
            // keep fold sizes balanced across classes
            offset += 1;
        }
        fold
    }
}

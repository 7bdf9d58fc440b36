//! Clinical-style cohorts: schema, synthetic generation, CSV ingestion and
//! dataset unions.

mod csvio;
mod synth;

pub use csvio::{load_csv, read_csv, write_csv, write_csv_to};
pub use synth::{generate_cohorts, generate_holdout, generate_with, preset, CohortSpec, Continuous, LatentModel};

use crate::data::Dataset;
use crate::error::{argument, Error, Result};

pub const CANCER_TYPES: usize = 16;
pub const CONTINUOUS: [&str; 5] = ["TMB", "PSTH", "Albumin", "NLR", "Age"];
pub const FEATURES: usize = 21;
/// Column of the first cancer-type flag.
pub const TYPE_OFFSET: usize = 5;
pub const TMB: usize = 0;
pub const PSTH: usize = 1;
pub const ALBUMIN: usize = 2;
pub const NLR: usize = 3;
pub const AGE: usize = 4;

/// Header names of the 21 feature columns.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = CONTINUOUS.iter().map(|s| s.to_string()).collect();
    names.extend((1..=CANCER_TYPES).map(|t| format!("CancerType_{t:02}")));
    names
}

/// Whether feature `j` takes only the values 0 and 1.
pub fn is_binary_feature(j: usize) -> bool {
    j == PSTH || j >= TYPE_OFFSET
}

/// One-hot cancer-type block for type `t` (0-based).
pub fn type_block(t: usize) -> [f64; CANCER_TYPES] {
    let mut b = [0.0; CANCER_TYPES];
    b[t] = 1.0;
    b
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub name: String,
    pub data: Dataset,
}

impl Cohort {
    pub fn new(name: impl Into<String>, data: Dataset) -> Result<Cohort> {
        if data.features() != FEATURES {
            return Err(Error::Shape(format!("cohort needs {FEATURES} features, got {}", data.features())));
        }
        for (i, row) in data.rows().enumerate() {
            validate_row(row, i + 1)?;
        }
        Ok(Cohort { name: name.into(), data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn response_rate(&self) -> f64 {
        self.data.positives() as f64 / self.data.len().max(1) as f64
    }

    /// 0-based cancer type of row `i`.
    pub fn cancer_type(&self, i: usize) -> usize {
        row_type(self.data.row(i))
    }

    pub fn type_counts(&self) -> [usize; CANCER_TYPES] {
        let mut c = [0; CANCER_TYPES];
        for i in 0..self.len() {
            c[self.cancer_type(i)] += 1;
        }
        c
    }
}

pub(crate) fn row_type(row: &[f64]) -> usize {
    row[TYPE_OFFSET..TYPE_OFFSET + CANCER_TYPES]
        .iter()
        .position(|&v| v == 1.0)
        .expect("validated one-hot block")
}

/// Range and one-hot checks for a parsed row (`row_no` is 1-based).
pub(crate) fn validate_row(row: &[f64], row_no: usize) -> Result<()> {
    let names = feature_names();
    for (j, &v) in row.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Validation { row: row_no, message: format!("{} is not finite", names[j]) });
        }
        if is_binary_feature(j) && v != 0.0 && v != 1.0 {
            return Err(Error::Validation { row: row_no, message: format!("{} must be 0 or 1, got {v}", names[j]) });
        }
    }
    if row[TMB] < 0.0 {
        return Err(Error::Validation { row: row_no, message: "TMB must be non-negative".into() });
    }
    for j in [ALBUMIN, NLR, AGE] {
        if row[j] <= 0.0 {
            return Err(Error::Validation { row: row_no, message: format!("{} must be positive", names[j]) });
        }
    }
    let flags = row[TYPE_OFFSET..TYPE_OFFSET + CANCER_TYPES].iter().filter(|&&v| v == 1.0).count();
    if flags != 1 {
        return Err(Error::Validation {
            row: row_no,
            message: format!("expected exactly one cancer-type flag, found {flags}"),
        });
    }
    Ok(())
}

/// Concatenation of member cohorts with its multi-hot indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetUnion {
    pub members: Vec<usize>,
    pub indicator: Vec<u8>,
    pub data: Dataset,
}

impl DatasetUnion {
    pub fn label_string(&self) -> String {
        self.indicator.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect()
    }
}

pub fn union(cohorts: &[Cohort], members: &[usize]) -> Result<DatasetUnion> {
    if members.is_empty() {
        return argument("a union needs at least one member cohort");
    }
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if let Some(&m) = sorted.iter().find(|&&m| m >= cohorts.len()) {
        return argument(format!("cohort index {m} out of range for {} cohorts", cohorts.len()));
    }
    let parts: Vec<&Dataset> = sorted.iter().map(|&m| &cohorts[m].data).collect();
    let data = Dataset::concat(&parts)?;
    let mut indicator = vec![0; cohorts.len()];
    for &m in &sorted {
        indicator[m] = 1;
    }
    Ok(DatasetUnion { members: sorted, indicator, data })
}

/// Every nonempty subset of `0..m` with at most `cap` members, ordered by
/// size and then lexicographically.
pub fn enumerate_unions(m: usize, cap: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for size in 1..=cap.min(m) {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            out.push(combo.clone());
            let mut i = size;
            while i > 0 && combo[i - 1] == m - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            combo[i - 1] += 1;
            for k in i..size {
                combo[k] = combo[k - 1] + 1;
            }
        }
    }
    out
}

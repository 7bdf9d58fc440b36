use serde::{Deserialize, Serialize};

use super::{Core, Embedding, InputScale, TensorTrain};
use crate::error::{shape, Result};

/// Serialized form: ranks, dims and one row-major array per core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtDocument {
    pub ranks: Vec<usize>,
    pub dims: Vec<usize>,
    pub output_site: Option<usize>,
    pub cores: Vec<Vec<f64>>,
    pub input_scale: InputScale,
    pub embedding: Embedding,
}

impl From<&TensorTrain> for TtDocument {
    fn from(tt: &TensorTrain) -> Self {
        TtDocument {
            ranks: tt.ranks(),
            dims: tt.dims(),
            output_site: tt.output_site,
            cores: tt.cores.iter().map(|c| c.data.clone()).collect(),
            input_scale: tt.input_scale,
            embedding: tt.embedding,
        }
    }
}

impl TryFrom<TtDocument> for TensorTrain {
    type Error = crate::error::Error;

    fn try_from(doc: TtDocument) -> Result<Self> {
        let n = doc.dims.len();
        if doc.ranks.len() != n + 1 || doc.cores.len() != n {
            return shape(format!(
                "document lists {} dims, {} ranks and {} cores",
                n,
                doc.ranks.len(),
                doc.cores.len()
            ));
        }
        let cores = doc
            .cores
            .into_iter()
            .enumerate()
            .map(|(k, data)| Core::new(doc.ranks[k], doc.dims[k], doc.ranks[k + 1], data))
            .collect::<Result<Vec<_>>>()?;
        TensorTrain::new(cores, doc.output_site, doc.input_scale, doc.embedding)
    }
}

impl TensorTrain {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&TtDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<TensorTrain> {
        let doc: TtDocument = serde_json::from_str(text)?;
        TensorTrain::try_from(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;

    #[test]
    fn json_round_trip_is_bit_exact() {
        let tt = random_tt(5, 3, 6).gauge_randomize(1);
        let text = tt.to_json().unwrap();
        let back = TensorTrain::from_json(&text).unwrap();
        assert_eq!(back, tt);
        let bits = |t: &TensorTrain| t.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&tt));
    }

    #[test]
    fn document_layout() {
        let tt = random_tt(2, 2, 6);
        let v: serde_json::Value = serde_json::from_str(&tt.to_json().unwrap()).unwrap();
        assert_eq!(v["ranks"], serde_json::json!([1, 2, 2, 1]));
        assert_eq!(v["output_site"], 2);
        assert_eq!(v["input_scale"], "standardized");
        assert_eq!(v["embedding"], "poly1");
    }

    #[test]
    fn malformed_documents_are_rejected() {
        let tt = random_tt(2, 2, 6);
        let mut doc = TtDocument::from(&tt);
        doc.cores[1].pop();
        assert!(TensorTrain::try_from(doc).is_err());
        assert!(TensorTrain::from_json("{\"ranks\": [1]}").is_err());
    }
}

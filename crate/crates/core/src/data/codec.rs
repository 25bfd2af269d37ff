//! Min/max scaling and categorical label encoding, both fit on the training split only.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::schema::Dataset;
use crate::error::{Error, Result};

/// Per-feature min/max bounds for scaling continuous inputs to [0,1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Fit scaling bounds over the continuous columns of the indexed rows.
pub fn fit_scaler(dataset: &Dataset, idx: &[usize]) -> Result<ScalerParams> {
    if idx.is_empty() {
        return Err(Error::validation("fit_scaler: empty index list"));
    }
    let d = dataset.schema.n_continuous();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for &i in idx {
        let record = dataset
            .records
            .get(i)
            .ok_or_else(|| Error::validation(format!("fit_scaler: index {i} out of range")))?;
        for (j, &v) in record.continuous.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Ok(ScalerParams { min, max })
}

/// Scale one raw feature vector. Constant features map to 0.0, out-of-range
/// values clip to [0,1] so downstream model inputs stay bounded.
pub fn apply_scaler(params: &ScalerParams, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != params.min.len() {
        return Err(Error::validation(format!(
            "apply_scaler: {} values, scaler fit on {}",
            x.len(),
            params.min.len()
        )));
    }
    Ok(x.iter()
        .enumerate()
        .map(|(j, &v)| {
            let span = params.max[j] - params.min[j];
            if span == 0.0 {
                0.0
            } else {
                ((v - params.min[j]) / span).clamp(0.0, 1.0)
            }
        })
        .collect())
}

/// Label encoder for one categorical feature.
///
/// Training tokens get dense indices 1..=n in first-occurrence order; index 0
/// is reserved for tokens never seen in training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMap {
    index: BTreeMap<String, usize>,
    /// Number of distinct training tokens (valid indices are 0..=cardinality).
    pub cardinality: usize,
}

pub const UNK_CATEGORY: usize = 0;

impl CategoryMap {
    pub fn encode(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_CATEGORY)
    }

    /// Number of embedding rows needed: training tokens plus the UNK slot.
    pub fn n_indices(&self) -> usize {
        self.cardinality + 1
    }
}

/// Label encoders for every categorical feature in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCodec {
    pub maps: Vec<CategoryMap>,
}

/// Fit per-feature encoders over the indexed rows.
pub fn fit_codec(dataset: &Dataset, idx: &[usize]) -> Result<CategoryCodec> {
    if idx.is_empty() {
        return Err(Error::validation("fit_codec: empty index list"));
    }
    let d = dataset.schema.n_categorical();
    let mut maps: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new(); d];
    for &i in idx {
        let record = dataset
            .records
            .get(i)
            .ok_or_else(|| Error::validation(format!("fit_codec: index {i} out of range")))?;
        for (j, token) in record.categorical.iter().enumerate() {
            let next = maps[j].len() + 1;
            maps[j].entry(token.clone()).or_insert(next);
        }
    }
    Ok(CategoryCodec {
        maps: maps
            .into_iter()
            .map(|index| {
                let cardinality = index.len();
                CategoryMap { index, cardinality }
            })
            .collect(),
    })
}

impl CategoryCodec {
    /// Encode one row of raw categorical tokens.
    pub fn encode_row(&self, tokens: &[String]) -> Result<Vec<usize>> {
        if tokens.len() != self.maps.len() {
            return Err(Error::validation(format!(
                "encode_row: {} tokens, codec fit on {}",
                tokens.len(),
                self.maps.len()
            )));
        }
        Ok(tokens
            .iter()
            .zip(&self.maps)
            .map(|(t, m)| m.encode(t))
            .collect())
    }
}

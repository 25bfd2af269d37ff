//! Train/holdout/out-of-time splitting.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::schema::Dataset;
use crate::error::{Error, Result};
use crate::seed::stream;

/// Row-index partition of a dataset.
///
/// The first and last cohorts are held out whole for out-of-time validation;
/// the core period in between is split into train and holdout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplits {
    pub train: Vec<usize>,
    pub holdout: Vec<usize>,
    pub oot_early: Vec<usize>,
    pub oot_late: Vec<usize>,
}

impl DataSplits {
    pub fn all_parts(&self) -> [(&'static str, &[usize]); 4] {
        [
            ("train", &self.train),
            ("holdout", &self.holdout),
            ("oot_early", &self.oot_early),
            ("oot_late", &self.oot_late),
        ]
    }
}

/// Split by cohort and then stratified-randomly within the core period.
///
/// Stratification is by (segment, label) so default rates stay matched
/// between train and holdout. Deterministic given the seed.
pub fn split_dataset(dataset: &Dataset, holdout_ratio: f64, seed: u64) -> Result<DataSplits> {
    if !(0.0..=1.0).contains(&holdout_ratio) {
        return Err(Error::config(format!(
            "holdout_ratio {holdout_ratio} outside [0,1]"
        )));
    }
    let cohorts = dataset.cohorts();
    if cohorts.len() < 3 {
        return Err(Error::validation(format!(
            "split_dataset needs >= 3 cohorts, dataset has {}",
            cohorts.len()
        )));
    }
    let earliest = cohorts[0];
    let latest = *cohorts.last().unwrap();

    let mut oot_early = Vec::new();
    let mut oot_late = Vec::new();
    let mut strata: std::collections::BTreeMap<(crate::data::schema::Segment, u8), Vec<usize>> =
        std::collections::BTreeMap::new();
    for (i, record) in dataset.records.iter().enumerate() {
        if record.cohort == earliest {
            oot_early.push(i);
        } else if record.cohort == latest {
            oot_late.push(i);
        } else {
            strata.entry((record.segment, record.label)).or_default().push(i);
        }
    }

    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for ((segment, label), mut indices) in strata {
        let mut rng = stream(seed, &format!("split-{segment}-{label}"));
        indices.shuffle(&mut rng);
        let n_holdout = (holdout_ratio * indices.len() as f64).round() as usize;
        holdout.extend_from_slice(&indices[..n_holdout]);
        train.extend_from_slice(&indices[n_holdout..]);
    }
    train.sort_unstable();
    holdout.sort_unstable();

    Ok(DataSplits { train, holdout, oot_early, oot_late })
}

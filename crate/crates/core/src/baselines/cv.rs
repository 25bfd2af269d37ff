//! Stratified cross-validation folds and the shared hyperparameter-search report.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::stream;

/// Fold index per record, stratified by label.
///
/// Positives and negatives are shuffled separately and dealt round-robin, so
/// every fold's positive count is within one of every other fold's.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::config("need at least 2 folds"));
    }
    if labels.len() < k {
        return Err(Error::validation(format!(
            "{} records cannot fill {k} folds",
            labels.len()
        )));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::validation("labels must be 0 or 1"));
    }
    let mut assignment = vec![0usize; labels.len()];
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> =
            (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let mut rng = stream(seed, &format!("fold-class-{class}"));
        idx.shuffle(&mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            assignment[i] = pos % k;
        }
    }
    Ok(assignment)
}

/// Train/test index split for one fold.
pub fn fold_split(assignment: &[usize], fold: usize) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, &f) in assignment.iter().enumerate() {
        if f == fold {
            test.push(i);
        } else {
            train.push(i);
        }
    }
    (train, test)
}

/// One evaluated hyperparameter combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCandidate {
    /// Named hyperparameter values, e.g. {"l1_ratio": 0.5, "lambda": 0.01}.
    pub params: BTreeMap<String, f64>,
    pub mean_auc: f64,
    pub std_auc: f64,
}

/// Grid-search outcome: every candidate with its CV score and the winner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSearchReport {
    pub candidates: Vec<CvCandidate>,
    pub chosen: usize,
    pub folds: usize,
}

impl CvSearchReport {
    pub fn chosen_candidate(&self) -> &CvCandidate {
        &self.candidates[self.chosen]
    }
}

/// Mean and sample-free std of per-fold AUCs (population std; folds are the
/// whole population of interest here).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n_pos: usize, n_neg: usize) -> Vec<u8> {
        let mut v = vec![1u8; n_pos];
        v.extend(vec![0u8; n_neg]);
        v
    }

    #[test]
    fn folds_partition_all_records() {
        let y = labels(30, 70);
        let assignment = stratified_folds(&y, 10, 7).unwrap();
        assert_eq!(assignment.len(), 100);
        for fold in 0..10 {
            let (train, test) = fold_split(&assignment, fold);
            assert_eq!(train.len() + test.len(), 100);
            let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..100).collect::<Vec<_>>());
        }
    }

    #[test]
    fn folds_are_stratified_within_one_record() {
        let y = labels(23, 77);
        let assignment = stratified_folds(&y, 10, 3).unwrap();
        let mut pos_per_fold = vec![0usize; 10];
        let mut n_per_fold = vec![0usize; 10];
        for (i, &f) in assignment.iter().enumerate() {
            n_per_fold[f] += 1;
            if y[i] == 1 {
                pos_per_fold[f] += 1;
            }
        }
        let pos_min = *pos_per_fold.iter().min().unwrap();
        let pos_max = *pos_per_fold.iter().max().unwrap();
        assert!(pos_max - pos_min <= 1, "positive counts {pos_per_fold:?}");
        let n_min = *n_per_fold.iter().min().unwrap();
        let n_max = *n_per_fold.iter().max().unwrap();
        assert!(n_max - n_min <= 2, "fold sizes {n_per_fold:?}");
    }

    #[test]
    fn assignment_is_deterministic_per_seed() {
        let y = labels(40, 60);
        let a = stratified_folds(&y, 5, 11).unwrap();
        let b = stratified_folds(&y, 5, 11).unwrap();
        let c = stratified_folds(&y, 5, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(stratified_folds(&[0, 1], 1, 0).is_err());
        assert!(stratified_folds(&[0, 1], 3, 0).is_err());
        assert!(stratified_folds(&[0, 2, 1], 2, 0).is_err());
    }

    #[test]
    fn mean_std_hand_example() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-12);
        assert!((s - (1.25f64).sqrt()).abs() < 1e-12);
    }
}

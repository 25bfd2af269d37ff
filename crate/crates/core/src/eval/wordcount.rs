//! Cumulative AUC over word-count thresholds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::auc;
use crate::eval::predset::PredictionSet;

/// One curve entry: AUC over the cases with word count ≥ threshold.
/// `auc` is absent when that subset lacks one of the two classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: usize,
    pub auc: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordCountCurve {
    /// Points in descending threshold order; the final threshold-0 point
    /// covers the full set.
    pub points: Vec<CurvePoint>,
}

/// Compute the curve for a descending threshold list.
pub fn auc_by_wordcount(preds: &PredictionSet, thresholds: &[usize]) -> Result<WordCountCurve> {
    if thresholds.is_empty() {
        return Err(Error::validation("empty threshold list"));
    }
    if thresholds.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::validation("thresholds must be strictly descending"));
    }
    let points = thresholds
        .iter()
        .map(|&threshold| {
            let rows: Vec<usize> =
                (0..preds.len()).filter(|&i| preds.word_counts[i] >= threshold).collect();
            let scores: Vec<f64> = rows.iter().map(|&i| preds.scores[i]).collect();
            let labels: Vec<u8> = rows.iter().map(|&i| preds.labels[i]).collect();
            CurvePoint {
                threshold,
                // A subset without both classes gets an absent entry, never a
                // fabricated value.
                auc: auc(&scores, &labels).ok(),
                n: rows.len(),
            }
        })
        .collect();
    Ok(WordCountCurve { points })
}

/// Default thresholds: deciles of the given word counts, plus 0, descending.
pub fn decile_thresholds(word_counts: &[usize]) -> Vec<usize> {
    let mut sorted = word_counts.to_vec();
    sorted.sort_unstable();
    let mut thresholds = std::collections::BTreeSet::new();
    thresholds.insert(0);
    if !sorted.is_empty() {
        for decile in 1..=9 {
            // Nearest-rank percentile.
            let rank = (decile * sorted.len()).div_ceil(10);
            thresholds.insert(sorted[rank.saturating_sub(1)]);
        }
    }
    thresholds.into_iter().rev().collect()
}

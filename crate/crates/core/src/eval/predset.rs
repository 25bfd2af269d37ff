//! Prediction containers and per-set metric reports.

use serde::{Deserialize, Serialize};

use crate::data::schema::Segment;
use crate::error::{Error, Result};
use crate::eval::metrics::{auc, spearman_rank_corr, weighted_brier};

/// Which feature block fed the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureSubset {
    Text,
    Structured,
    Combined,
}

impl FeatureSubset {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSubset::Text => "text",
            FeatureSubset::Structured => "structured",
            FeatureSubset::Combined => "combined",
        }
    }

    pub const ALL: [FeatureSubset; 3] =
        [FeatureSubset::Text, FeatureSubset::Structured, FeatureSubset::Combined];
}

impl std::fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scores for one model on one record set, with the row context metrics need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub model: String,
    pub subset: FeatureSubset,
    pub ids: Vec<u64>,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
    pub word_counts: Vec<usize>,
    pub segments: Vec<Segment>,
}

impl PredictionSet {
    pub fn new(
        model: impl Into<String>,
        subset: FeatureSubset,
        ids: Vec<u64>,
        scores: Vec<f64>,
        labels: Vec<u8>,
        word_counts: Vec<usize>,
        segments: Vec<Segment>,
    ) -> Result<Self> {
        let n = ids.len();
        if [scores.len(), labels.len(), word_counts.len(), segments.len()] != [n, n, n, n] {
            return Err(Error::validation("prediction set fields differ in length"));
        }
        if scores.iter().any(|&s| !s.is_finite() || !(0.0..=1.0).contains(&s)) {
            return Err(Error::validation("scores must be finite probabilities in [0,1]"));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::validation("labels must be 0 or 1"));
        }
        Ok(PredictionSet { model: model.into(), subset, ids, scores, labels, word_counts, segments })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Rows belonging to one segment, as a new set.
    pub fn filter_segment(&self, segment: Segment) -> PredictionSet {
        let keep: Vec<usize> =
            (0..self.len()).filter(|&i| self.segments[i] == segment).collect();
        self.take(&keep)
    }

    /// Row subset by position.
    pub fn take(&self, rows: &[usize]) -> PredictionSet {
        PredictionSet {
            model: self.model.clone(),
            subset: self.subset,
            ids: rows.iter().map(|&i| self.ids[i]).collect(),
            scores: rows.iter().map(|&i| self.scores[i]).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            word_counts: rows.iter().map(|&i| self.word_counts[i]).collect(),
            segments: rows.iter().map(|&i| self.segments[i]).collect(),
        }
    }

    pub fn metric_report(&self) -> Result<MetricReport> {
        MetricReport::compute(&self.scores, &self.labels)
    }
}

/// Headline metrics for one prediction set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc: f64,
    pub weighted_brier: f64,
    pub n: usize,
    pub default_rate: f64,
}

impl MetricReport {
    pub fn compute(scores: &[f64], labels: &[u8]) -> Result<Self> {
        let n = labels.len();
        let n_pos = labels.iter().filter(|&&y| y == 1).count();
        Ok(MetricReport {
            auc: auc(scores, labels)?,
            weighted_brier: weighted_brier(scores, labels)?,
            n,
            default_rate: n_pos as f64 / n as f64,
        })
    }
}

/// Spearman correlations between feature-subset score sets, overall and per segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub subsets: Vec<FeatureSubset>,
    /// Keys: "all" plus each segment name; values: symmetric ρ matrices.
    pub by_segment: std::collections::BTreeMap<String, Vec<Vec<f64>>>,
}

/// Pairwise Spearman correlations between sets scoring the same records.
pub fn correlation_matrix(sets: &[&PredictionSet]) -> Result<CorrelationMatrix> {
    if sets.is_empty() {
        return Err(Error::validation("no prediction sets given"));
    }
    for set in &sets[1..] {
        if set.ids != sets[0].ids {
            return Err(Error::validation(
                "correlation requires sets scoring identical records in identical order",
            ));
        }
    }
    let groups: Vec<(String, Vec<usize>)> = {
        let mut g = vec![("all".to_string(), (0..sets[0].len()).collect::<Vec<_>>())];
        for segment in Segment::ALL {
            let rows: Vec<usize> = (0..sets[0].len())
                .filter(|&i| sets[0].segments[i] == segment)
                .collect();
            g.push((segment.as_str().to_string(), rows));
        }
        g
    };
    let mut by_segment = std::collections::BTreeMap::new();
    for (name, rows) in groups {
        let mut matrix = vec![vec![1.0; sets.len()]; sets.len()];
        for i in 0..sets.len() {
            for j in (i + 1)..sets.len() {
                let a: Vec<f64> = rows.iter().map(|&r| sets[i].scores[r]).collect();
                let b: Vec<f64> = rows.iter().map(|&r| sets[j].scores[r]).collect();
                let rho = spearman_rank_corr(&a, &b)?;
                matrix[i][j] = rho;
                matrix[j][i] = rho;
            }
        }
        by_segment.insert(name, matrix);
    }
    Ok(CorrelationMatrix { subsets: sets.iter().map(|s| s.subset).collect(), by_segment })
}

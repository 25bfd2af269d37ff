//! Permutation feature importance and the structured-vs-combined shift.
//!
//! Importance of a feature is the mean AUC drop when that feature's column
//! is shuffled across rows while everything else stays fixed. The text input
//! counts as one feature: whole documents are shuffled, never words.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::auc;
use crate::seed::stream;
use crate::text::TokenSequence;

/// Report label for the pooled text representation when it enters
/// importance ranking as a single feature.
pub const TEXT_FEATURE_LABEL: &str = "BERT";

/// One model input column. Shuffling a `Docs` column moves whole documents.
#[derive(Debug, Clone)]
pub enum ColumnData {
    Codes(Vec<usize>),
    Values(Vec<f64>),
    Docs(Vec<TokenSequence>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Codes(v) => v.len(),
            ColumnData::Values(v) => v.len(),
            ColumnData::Docs(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn shuffle<R: rand::Rng>(&mut self, rng: &mut R) {
        match self {
            ColumnData::Codes(v) => v.shuffle(rng),
            ColumnData::Values(v) => v.shuffle(rng),
            ColumnData::Docs(v) => v.shuffle(rng),
        }
    }
}

/// A named model input column.
#[derive(Debug, Clone)]
pub struct PermutationColumn {
    pub name: String,
    pub data: ColumnData,
}

impl PermutationColumn {
    pub fn new(name: impl Into<String>, data: ColumnData) -> Self {
        PermutationColumn { name: name.into(), data }
    }
}

/// Importance of one feature: mean and std of the AUC drop over repeats.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    pub mean_drop: f64,
    pub std_drop: f64,
    /// Repeats that produced a metric; fewer than `repeats` when flagged.
    pub present_repeats: usize,
    /// True when any repeat failed to score or to yield a metric.
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PermutationImportanceReport {
    pub features: Vec<FeatureImportance>,
    pub baseline_auc: f64,
    pub repeats: usize,
    pub seed: u64,
}

impl PermutationImportanceReport {
    pub fn importance_of(&self, name: &str) -> Option<&FeatureImportance> {
        self.features.iter().find(|f| f.name == name)
    }
}

fn validate_columns(columns: &[PermutationColumn], n_rows: usize) -> Result<()> {
    if columns.is_empty() {
        return Err(Error::validation("permutation importance needs at least one feature column"));
    }
    let mut seen = BTreeSet::new();
    for col in columns {
        if !seen.insert(col.name.as_str()) {
            return Err(Error::validation(format!("duplicate feature column name {:?}", col.name)));
        }
        if col.data.len() != n_rows {
            return Err(Error::validation(format!(
                "feature column {:?} has {} rows but labels have {}",
                col.name,
                col.data.len(),
                n_rows
            )));
        }
    }
    Ok(())
}

/// Mean AUC drop per feature when that feature is shuffled, over `repeats`
/// independent seed-derived shuffles.
///
/// The scorer receives the columns in their input order and returns one
/// probability per row. A repeat whose scoring or metric fails is recorded
/// as absent and flags the feature; the baseline run must succeed.
pub fn permutation_importance<F>(
    score: F,
    columns: &[PermutationColumn],
    labels: &[u8],
    repeats: usize,
    seed: u64,
) -> Result<PermutationImportanceReport>
where
    F: Fn(&[ColumnData]) -> Result<Vec<f64>> + Sync,
{
    if repeats == 0 {
        return Err(Error::config("permutation repeats must be at least 1"));
    }
    validate_columns(columns, labels.len())?;

    let baseline: Vec<ColumnData> = columns.iter().map(|c| c.data.clone()).collect();
    let baseline_scores = score(&baseline)?;
    let baseline_auc = auc(&baseline_scores, labels)?;

    let units: Vec<(usize, usize)> =
        (0..columns.len()).flat_map(|fi| (0..repeats).map(move |r| (fi, r))).collect();
    // One rng stream per (feature, repeat) unit keeps parallel order irrelevant.
    let drops: Vec<(usize, Option<f64>)> = units
        .par_iter()
        .map(|&(fi, r)| {
            let mut cols = baseline.clone();
            let mut rng = stream(seed, &format!("perm-{fi}-{r}"));
            cols[fi].shuffle(&mut rng);
            let drop = score(&cols)
                .ok()
                .and_then(|s| auc(&s, labels).ok())
                .map(|a| baseline_auc - a);
            (fi, drop)
        })
        .collect();

    let features = columns
        .iter()
        .enumerate()
        .map(|(fi, col)| {
            let present: Vec<f64> =
                drops.iter().filter(|(i, _)| *i == fi).filter_map(|(_, d)| *d).collect();
            let n = present.len();
            let (mean, std) = if n == 0 {
                (0.0, 0.0)
            } else {
                let mean = present.iter().sum::<f64>() / n as f64;
                let var = present.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
                (mean, var.sqrt())
            };
            FeatureImportance {
                name: col.name.clone(),
                mean_drop: mean,
                std_drop: std,
                present_repeats: n,
                flagged: n < repeats,
            }
        })
        .collect();

    Ok(PermutationImportanceReport { features, baseline_auc, repeats, seed })
}

/// Per-feature change in importance between a structured-only model and the
/// combined model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceShiftRow {
    pub name: String,
    pub baseline: f64,
    pub combined: f64,
    pub delta: f64,
}

/// Shift rows sorted by delta ascending, so the features that lost the most
/// importance in the combined model come first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceShift {
    pub rows: Vec<ImportanceShiftRow>,
}

impl ImportanceShift {
    pub fn delta_of(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.name == name).map(|r| r.delta)
    }
}

/// Compare structured-feature importance across the two models.
///
/// The text feature (labelled [`TEXT_FEATURE_LABEL`]) is not a structured
/// feature and is dropped before the set comparison; the remaining feature
/// sets must match exactly.
pub fn importance_shift(
    base: &PermutationImportanceReport,
    combined: &PermutationImportanceReport,
) -> Result<ImportanceShift> {
    let structural = |report: &PermutationImportanceReport| -> Vec<(String, f64)> {
        report
            .features
            .iter()
            .filter(|f| f.name != TEXT_FEATURE_LABEL)
            .map(|f| (f.name.clone(), f.mean_drop))
            .collect()
    };
    let base_rows = structural(base);
    let combined_rows = structural(combined);

    let base_names: BTreeSet<&str> = base_rows.iter().map(|(n, _)| n.as_str()).collect();
    let combined_names: BTreeSet<&str> = combined_rows.iter().map(|(n, _)| n.as_str()).collect();
    for name in &base_names {
        if !combined_names.contains(name) {
            return Err(Error::validation(format!(
                "feature {name:?} missing from the combined importance report"
            )));
        }
    }
    for name in &combined_names {
        if !base_names.contains(name) {
            return Err(Error::validation(format!(
                "feature {name:?} missing from the baseline importance report"
            )));
        }
    }

    let mut rows: Vec<ImportanceShiftRow> = base_rows
        .into_iter()
        .map(|(name, baseline)| {
            let combined_drop =
                combined_rows.iter().find(|(n, _)| *n == name).map(|(_, d)| *d).unwrap();
            ImportanceShiftRow { name, baseline, combined: combined_drop, delta: combined_drop - baseline }
        })
        .collect();
    rows.sort_by(|a, b| a.delta.total_cmp(&b.delta).then_with(|| a.name.cmp(&b.name)));
    Ok(ImportanceShift { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sigmoid(z: f64) -> f64 {
        1.0 / (1.0 + (-z).exp())
    }

    /// Two columns: an informative value and pure noise the scorer barely uses.
    fn signal_and_noise(n: usize) -> (Vec<PermutationColumn>, Vec<u8>) {
        let mut rng = stream(99, "perm-test-data");
        let x0: Vec<f64> = (0..n).map(|_| crate::seed::standard_normal(&mut rng)).collect();
        let noise: Vec<f64> = (0..n).map(|_| crate::seed::standard_normal(&mut rng)).collect();
        let labels: Vec<u8> = x0.iter().map(|&v| u8::from(v > 0.0)).collect();
        let columns = vec![
            PermutationColumn::new("signal", ColumnData::Values(x0)),
            PermutationColumn::new("noise", ColumnData::Values(noise)),
        ];
        (columns, labels)
    }

    #[test]
    fn ignored_feature_has_exactly_zero_importance() {
        let (columns, labels) = signal_and_noise(400);
        let score = |cols: &[ColumnData]| -> Result<Vec<f64>> {
            let ColumnData::Values(x0) = &cols[0] else { unreachable!() };
            Ok(x0.iter().map(|&v| sigmoid(v)).collect())
        };
        let report = permutation_importance(score, &columns, &labels, 5, 11).unwrap();
        let noise = report.importance_of("noise").unwrap();
        assert_eq!(noise.mean_drop, 0.0);
        assert_eq!(noise.std_drop, 0.0);
        assert_eq!(noise.present_repeats, 5);
        assert!(!noise.flagged);
    }

    #[test]
    fn weakly_used_noise_feature_stays_below_half_a_percent() {
        let (columns, labels) = signal_and_noise(4000);
        let score = |cols: &[ColumnData]| -> Result<Vec<f64>> {
            let ColumnData::Values(x0) = &cols[0] else { unreachable!() };
            let ColumnData::Values(x1) = &cols[1] else { unreachable!() };
            Ok(x0.iter().zip(x1).map(|(&a, &b)| sigmoid(2.0 * a + 0.02 * b)).collect())
        };
        let report = permutation_importance(score, &columns, &labels, 10, 17).unwrap();
        let noise = report.importance_of("noise").unwrap();
        assert!(noise.mean_drop.abs() <= 0.005, "noise importance {}", noise.mean_drop);
    }

    #[test]
    fn sole_informative_feature_drops_to_chance() {
        let (columns, labels) = signal_and_noise(4000);
        let score = |cols: &[ColumnData]| -> Result<Vec<f64>> {
            let ColumnData::Values(x0) = &cols[0] else { unreachable!() };
            Ok(x0.iter().map(|&v| sigmoid(v)).collect())
        };
        let report = permutation_importance(score, &columns, &labels, 10, 23).unwrap();
        assert!((report.baseline_auc - 1.0).abs() < 1e-12);
        let signal = report.importance_of("signal").unwrap();
        // Permuting the only signal leaves a coin-flip ranking: drop ~ AUC - 0.5.
        assert!(
            (signal.mean_drop - (report.baseline_auc - 0.5)).abs() <= 0.02,
            "signal importance {}",
            signal.mean_drop
        );
    }

    #[test]
    fn joint_permutation_of_everything_reaches_chance() {
        let (columns, labels) = signal_and_noise(4000);
        let score = |cols: &[ColumnData]| -> Result<Vec<f64>> {
            let ColumnData::Values(x0) = &cols[0] else { unreachable!() };
            let ColumnData::Values(x1) = &cols[1] else { unreachable!() };
            Ok(x0.iter().zip(x1).map(|(&a, &b)| sigmoid(2.0 * a + 0.5 * b)).collect())
        };
        let mut sum = 0.0;
        for r in 0..10 {
            let mut cols: Vec<ColumnData> = columns.iter().map(|c| c.data.clone()).collect();
            for (fi, col) in cols.iter_mut().enumerate() {
                col.shuffle(&mut stream(31, &format!("joint-{fi}-{r}")));
            }
            sum += auc(&score(&cols).unwrap(), &labels).unwrap();
        }
        let mean_auc = sum / 10.0;
        assert!((mean_auc - 0.5).abs() <= 0.02, "jointly permuted AUC {mean_auc}");
    }

    #[test]
    fn documents_are_shuffled_as_whole_units() {
        let n = 2000;
        let mut rng = stream(5, "perm-docs");
        let mut docs = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let risky = rng.gen::<f64>() < 0.5;
            // Word id 9 marks a risky document; id 4 is filler.
            let ids = if risky { vec![2u32, 9, 4] } else { vec![2u32, 4, 4] };
            docs.push(TokenSequence { ids, mask: vec![1.0; 3] });
            labels.push(u8::from(risky));
        }
        let columns = vec![PermutationColumn::new(TEXT_FEATURE_LABEL, ColumnData::Docs(docs))];
        let score = |cols: &[ColumnData]| -> Result<Vec<f64>> {
            let ColumnData::Docs(docs) = &cols[0] else { unreachable!() };
            Ok(docs
                .iter()
                .map(|d| if d.ids.contains(&9) { 0.9 } else { 0.1 })
                .collect())
        };
        let report = permutation_importance(score, &columns, &labels, 10, 41).unwrap();
        let text = report.importance_of(TEXT_FEATURE_LABEL).unwrap();
        assert!((report.baseline_auc - 1.0).abs() < 1e-12);
        assert!((text.mean_drop - 0.5).abs() <= 0.02, "text importance {}", text.mean_drop);
    }

    #[test]
    fn failed_repeats_are_absent_and_flag_the_feature() {
        let n = 200;
        let guard: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let (mut columns, labels) = signal_and_noise(n);
        columns[1] = PermutationColumn::new("guard", ColumnData::Values(guard));
        // Fails whenever the guard column is out of order, i.e. exactly when
        // the guard itself was permuted.
        let score = |cols: &[ColumnData]| -> Result<Vec<f64>> {
            let ColumnData::Values(x0) = &cols[0] else { unreachable!() };
            let ColumnData::Values(g) = &cols[1] else { unreachable!() };
            if g.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::numeric("guard column disturbed"));
            }
            Ok(x0.iter().map(|&v| sigmoid(v)).collect())
        };
        let report = permutation_importance(score, &columns, &labels, 4, 53).unwrap();
        let guard = report.importance_of("guard").unwrap();
        assert!(guard.flagged);
        assert_eq!(guard.present_repeats, 0);
        assert_eq!(guard.mean_drop, 0.0);
        let signal = report.importance_of("signal").unwrap();
        assert!(!signal.flagged);
        assert_eq!(signal.present_repeats, 4);
    }

    #[test]
    fn reports_are_deterministic_for_a_seed() {
        let (columns, labels) = signal_and_noise(500);
        let score = |cols: &[ColumnData]| -> Result<Vec<f64>> {
            let ColumnData::Values(x0) = &cols[0] else { unreachable!() };
            let ColumnData::Values(x1) = &cols[1] else { unreachable!() };
            Ok(x0.iter().zip(x1).map(|(&a, &b)| sigmoid(a + 0.3 * b)).collect())
        };
        let a = permutation_importance(&score, &columns, &labels, 6, 77).unwrap();
        let b = permutation_importance(&score, &columns, &labels, 6, 77).unwrap();
        for (fa, fb) in a.features.iter().zip(&b.features) {
            assert_eq!(fa.mean_drop.to_bits(), fb.mean_drop.to_bits());
            assert_eq!(fa.std_drop.to_bits(), fb.std_drop.to_bits());
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let (columns, labels) = signal_and_noise(50);
        let score = |_: &[ColumnData]| Ok(vec![0.5; 50]);
        let err = permutation_importance(score, &columns, &labels, 0, 1).unwrap_err();
        assert!(err.to_string().contains("at least 1"));

        let dup = vec![columns[0].clone(), columns[0].clone()];
        let err = permutation_importance(score, &dup, &labels, 1, 1).unwrap_err();
        assert!(err.to_string().contains("duplicate"));

        let short = vec![PermutationColumn::new("x", ColumnData::Values(vec![1.0; 10]))];
        let err = permutation_importance(score, &short, &labels, 1, 1).unwrap_err();
        assert!(err.to_string().contains("10 rows"));

        let err = permutation_importance(score, &[], &labels, 1, 1).unwrap_err();
        assert!(err.to_string().contains("at least one feature"));
    }

    fn report_from(pairs: &[(&str, f64)]) -> PermutationImportanceReport {
        PermutationImportanceReport {
            features: pairs
                .iter()
                .map(|&(name, mean_drop)| FeatureImportance {
                    name: name.to_string(),
                    mean_drop,
                    std_drop: 0.0,
                    present_repeats: 1,
                    flagged: false,
                })
                .collect(),
            baseline_auc: 0.8,
            repeats: 1,
            seed: 0,
        }
    }

    #[test]
    fn identical_reports_shift_by_zero() {
        let r = report_from(&[("a", 0.2), ("b", 0.05)]);
        let shift = importance_shift(&r, &r).unwrap();
        assert!(shift.rows.iter().all(|row| row.delta == 0.0));
        assert_eq!(shift.rows.len(), 2);
    }

    #[test]
    fn text_label_is_excluded_and_losses_sort_first() {
        let base = report_from(&[("a", 0.20), ("b", 0.05)]);
        let combined = report_from(&[("a", 0.08), ("b", 0.06), (TEXT_FEATURE_LABEL, 0.30)]);
        let shift = importance_shift(&base, &combined).unwrap();
        assert_eq!(shift.rows.len(), 2);
        assert_eq!(shift.rows[0].name, "a");
        assert!((shift.rows[0].delta - -0.12).abs() < 1e-12);
        assert!((shift.delta_of("b").unwrap() - 0.01).abs() < 1e-12);
        assert!(shift.delta_of(TEXT_FEATURE_LABEL).is_none());
    }

    #[test]
    fn missing_feature_is_named_in_the_error() {
        let base = report_from(&[("a", 0.2), ("b", 0.05)]);
        let combined = report_from(&[("a", 0.1)]);
        let err = importance_shift(&base, &combined).unwrap_err();
        assert!(err.to_string().contains("\"b\""), "got {err}");

        let err = importance_shift(&combined, &base).unwrap_err();
        assert!(err.to_string().contains("\"b\""), "got {err}");
        assert!(err.to_string().contains("baseline"), "got {err}");
    }
}

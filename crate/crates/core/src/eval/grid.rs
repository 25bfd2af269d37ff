//! Model × feature-subset × split × segment report grid.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::schema::Segment;
use crate::eval::predset::{FeatureSubset, MetricReport, PredictionSet};

/// One grid cell. `report` is absent when no predictions exist for the
/// combination or its rows carry a single class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub model: String,
    pub subset: FeatureSubset,
    pub split: String,
    /// Segment name, or "all" for the unsegmented row set.
    pub segment: String,
    pub report: Option<MetricReport>,
    /// Best AUC among cells sharing (split, segment).
    pub best_auc: bool,
    /// Best (lowest) weighted Brier among cells sharing (split, segment).
    pub best_brier: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportGrid {
    pub cells: Vec<GridCell>,
}

/// Build the full grid from tagged prediction sets, flagging the best model
/// and subset per (split, segment) group.
pub fn segment_report(sets: &[(String, &PredictionSet)]) -> ReportGrid {
    let models: BTreeSet<String> = sets.iter().map(|(_, s)| s.model.clone()).collect();
    let splits: BTreeSet<String> = sets.iter().map(|(split, _)| split.clone()).collect();
    let subsets: Vec<FeatureSubset> = FeatureSubset::ALL
        .into_iter()
        .filter(|fs| sets.iter().any(|(_, s)| s.subset == *fs))
        .collect();
    let segments: Vec<String> = std::iter::once("all".to_string())
        .chain(Segment::ALL.iter().map(|s| s.as_str().to_string()))
        .collect();

    let mut cells = Vec::new();
    for split in &splits {
        for segment in &segments {
            let group_start = cells.len();
            for model in &models {
                for &subset in &subsets {
                    let report = sets
                        .iter()
                        .find(|(sp, s)| sp == split && s.model == *model && s.subset == subset)
                        .and_then(|(_, s)| {
                            let sliced = match segment.as_str() {
                                "all" => (*s).clone(),
                                name => s.filter_segment(Segment::parse(name).unwrap()),
                            };
                            sliced.metric_report().ok()
                        });
                    cells.push(GridCell {
                        model: model.clone(),
                        subset,
                        split: split.clone(),
                        segment: segment.clone(),
                        report,
                        best_auc: false,
                        best_brier: false,
                    });
                }
            }
            flag_best(&mut cells[group_start..]);
        }
    }
    ReportGrid { cells }
}

fn flag_best(group: &mut [GridCell]) {
    let best_auc = group
        .iter()
        .filter_map(|c| c.report.as_ref().map(|r| r.auc))
        .fold(f64::NEG_INFINITY, f64::max);
    let best_brier = group
        .iter()
        .filter_map(|c| c.report.as_ref().map(|r| r.weighted_brier))
        .fold(f64::INFINITY, f64::min);
    for cell in group {
        if let Some(report) = &cell.report {
            cell.best_auc = report.auc == best_auc;
            cell.best_brier = report.weighted_brier == best_brier;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(model: &str, subset: FeatureSubset, scores: Vec<f64>) -> PredictionSet {
        let n = scores.len();
        PredictionSet::new(
            model,
            subset,
            (0..n as u64).collect(),
            scores,
            (0..n).map(|i| (i % 2) as u8).collect(),
            vec![40; n],
            (0..n)
                .map(|i| if i % 4 < 2 { Segment::New } else { Segment::Existing })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_cell_grid_equals_direct_metrics() {
        let s = set("lr", FeatureSubset::Structured, vec![0.1, 0.9, 0.3, 0.7]);
        let grid = segment_report(&[("holdout".into(), &s)]);
        let all_cell = grid
            .cells
            .iter()
            .find(|c| c.segment == "all")
            .unwrap();
        assert_eq!(all_cell.report, Some(s.metric_report().unwrap()));
        assert!(all_cell.best_auc && all_cell.best_brier);
    }

    #[test]
    fn identical_sets_give_identical_cells() {
        let a = set("a", FeatureSubset::Text, vec![0.2, 0.8, 0.4, 0.6]);
        let b = set("b", FeatureSubset::Text, vec![0.2, 0.8, 0.4, 0.6]);
        let grid = segment_report(&[("holdout".into(), &a), ("holdout".into(), &b)]);
        let cell_a = grid.cells.iter().find(|c| c.model == "a" && c.segment == "all").unwrap();
        let cell_b = grid.cells.iter().find(|c| c.model == "b" && c.segment == "all").unwrap();
        assert_eq!(cell_a.report, cell_b.report);
        // Equal metrics: both flagged best.
        assert!(cell_a.best_auc && cell_b.best_auc);
    }

    #[test]
    fn segment_cell_counts_sum_to_the_full_set() {
        let s = set("lr", FeatureSubset::Combined, vec![0.1, 0.9, 0.3, 0.7, 0.2, 0.8, 0.4, 0.6]);
        let grid = segment_report(&[("holdout".into(), &s)]);
        let n = |segment: &str| {
            grid.cells
                .iter()
                .find(|c| c.segment == segment)
                .and_then(|c| c.report.as_ref())
                .map(|r| r.n)
                .unwrap()
        };
        assert_eq!(n("all"), n("new") + n("existing"));
    }

    #[test]
    fn missing_combination_is_absent() {
        let a = set("lr", FeatureSubset::Text, vec![0.2, 0.8, 0.4, 0.6]);
        let b = set("rf", FeatureSubset::Structured, vec![0.3, 0.7, 0.5, 0.5]);
        let grid = segment_report(&[("holdout".into(), &a), ("holdout".into(), &b)]);
        let absent = grid
            .cells
            .iter()
            .find(|c| c.model == "lr" && c.subset == FeatureSubset::Structured && c.segment == "all")
            .unwrap();
        assert!(absent.report.is_none());
        assert!(!absent.best_auc && !absent.best_brier);
    }

    #[test]
    fn best_flags_pick_the_strongest_model() {
        let good = set("good", FeatureSubset::Structured, vec![0.1, 0.9, 0.2, 0.8]);
        let bad = set("bad", FeatureSubset::Structured, vec![0.6, 0.4, 0.7, 0.3]);
        let grid = segment_report(&[("holdout".into(), &good), ("holdout".into(), &bad)]);
        let all = |model: &str| {
            grid.cells.iter().find(|c| c.model == model && c.segment == "all").unwrap()
        };
        assert!(all("good").best_auc && all("good").best_brier);
        assert!(!all("bad").best_auc && !all("bad").best_brier);
    }
}

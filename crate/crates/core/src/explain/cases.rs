//! Selection of uncertain cases most improved by adding text.
//!
//! Candidates are records whose structured-only probability falls in an
//! uncertainty band; improvement is how much closer the combined score gets
//! to the true label.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::predset::PredictionSet;

/// Band and cut-off for [`select_uncertain_improved`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UncertainSelectConfig {
    pub band_lo: f64,
    pub band_hi: f64,
    pub top_n: usize,
}

impl Default for UncertainSelectConfig {
    fn default() -> Self {
        UncertainSelectConfig { band_lo: 0.40, band_hi: 0.60, top_n: 250 }
    }
}

impl UncertainSelectConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.band_lo.is_finite() && self.band_hi.is_finite()) || self.band_lo > self.band_hi {
            return Err(Error::config(format!(
                "uncertainty band [{}, {}] is not a valid interval",
                self.band_lo, self.band_hi
            )));
        }
        Ok(())
    }
}

/// One selected record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UncertainCase {
    pub id: u64,
    pub structured: f64,
    pub combined: f64,
    pub label: u8,
    pub improvement: f64,
}

/// Selection ordered by improvement descending, ties by ascending id.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UncertainCaseSelection {
    pub band: (f64, f64),
    pub top_n: usize,
    pub cases: Vec<UncertainCase>,
}

impl UncertainCaseSelection {
    pub fn ids(&self) -> Vec<u64> {
        self.cases.iter().map(|c| c.id).collect()
    }
}

/// Records with a structured score inside the band (inclusive), ranked by
/// improvement = |label - structured| - |label - combined|, truncated to
/// `top_n`. The two prediction sets must describe the same records in the
/// same order.
pub fn select_uncertain_improved(
    structured: &PredictionSet,
    combined: &PredictionSet,
    config: &UncertainSelectConfig,
) -> Result<UncertainCaseSelection> {
    config.validate()?;
    if structured.ids != combined.ids {
        return Err(Error::validation(
            "structured and combined prediction sets disagree on record ids",
        ));
    }
    if structured.labels != combined.labels {
        return Err(Error::validation(
            "structured and combined prediction sets disagree on labels",
        ));
    }

    let mut cases: Vec<UncertainCase> = (0..structured.len())
        .filter(|&i| {
            let s = structured.scores[i];
            config.band_lo <= s && s <= config.band_hi
        })
        .map(|i| {
            let s = structured.scores[i];
            let c = combined.scores[i];
            let y = f64::from(structured.labels[i]);
            UncertainCase {
                id: structured.ids[i],
                structured: s,
                combined: c,
                label: structured.labels[i],
                improvement: (y - s).abs() - (y - c).abs(),
            }
        })
        .collect();
    cases.sort_by(|a, b| b.improvement.total_cmp(&a.improvement).then_with(|| a.id.cmp(&b.id)));
    cases.truncate(config.top_n);

    Ok(UncertainCaseSelection {
        band: (config.band_lo, config.band_hi),
        top_n: config.top_n,
        cases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::Segment;
    use crate::eval::predset::FeatureSubset;

    fn set(subset: FeatureSubset, scores: Vec<f64>, labels: Vec<u8>) -> PredictionSet {
        let n = scores.len();
        PredictionSet::new(
            "m",
            subset,
            (0..n as u64).collect(),
            scores,
            labels,
            vec![0; n],
            vec![Segment::New; n],
        )
        .unwrap()
    }

    #[test]
    fn improvement_is_the_absolute_error_reduction() {
        let s = set(FeatureSubset::Structured, vec![0.5, 0.55], vec![1, 1]);
        let c = set(FeatureSubset::Combined, vec![0.9, 0.60], vec![1, 1]);
        let sel = select_uncertain_improved(&s, &c, &UncertainSelectConfig::default()).unwrap();
        assert_eq!(sel.cases.len(), 2);
        assert_eq!(sel.cases[0].id, 0);
        assert!((sel.cases[0].improvement - 0.4).abs() < 1e-12);
        assert!((sel.cases[1].improvement - 0.05).abs() < 1e-12);
    }

    #[test]
    fn band_is_inclusive_and_filters_on_the_structured_score() {
        let s = set(FeatureSubset::Structured, vec![0.40, 0.60, 0.39, 0.61], vec![1; 4]);
        let c = set(FeatureSubset::Combined, vec![0.9, 0.9, 0.9, 0.9], vec![1; 4]);
        let sel = select_uncertain_improved(&s, &c, &UncertainSelectConfig::default()).unwrap();
        assert_eq!(sel.ids(), vec![0, 1]);
    }

    #[test]
    fn empty_band_intersection_yields_empty_selection() {
        let s = set(FeatureSubset::Structured, vec![0.1, 0.9], vec![0, 1]);
        let c = set(FeatureSubset::Combined, vec![0.1, 0.9], vec![0, 1]);
        let sel = select_uncertain_improved(&s, &c, &UncertainSelectConfig::default()).unwrap();
        assert!(sel.cases.is_empty());
    }

    #[test]
    fn top_n_larger_than_candidates_returns_all() {
        let s = set(FeatureSubset::Structured, vec![0.5; 3], vec![1; 3]);
        let c = set(FeatureSubset::Combined, vec![0.6, 0.7, 0.8], vec![1; 3]);
        let cfg = UncertainSelectConfig { top_n: 100, ..Default::default() };
        let sel = select_uncertain_improved(&s, &c, &cfg).unwrap();
        assert_eq!(sel.cases.len(), 3);
        assert_eq!(sel.ids(), vec![2, 1, 0]);
    }

    #[test]
    fn top_n_truncates_after_ranking() {
        let s = set(FeatureSubset::Structured, vec![0.5; 3], vec![1; 3]);
        let c = set(FeatureSubset::Combined, vec![0.6, 0.8, 0.7], vec![1; 3]);
        let cfg = UncertainSelectConfig { top_n: 2, ..Default::default() };
        let sel = select_uncertain_improved(&s, &c, &cfg).unwrap();
        assert_eq!(sel.ids(), vec![1, 2]);
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let s = set(FeatureSubset::Structured, vec![0.5, 0.5, 0.5], vec![1; 3]);
        let c = set(FeatureSubset::Combined, vec![0.7, 0.7, 0.7], vec![1; 3]);
        let sel = select_uncertain_improved(&s, &c, &UncertainSelectConfig::default()).unwrap();
        assert_eq!(sel.ids(), vec![0, 1, 2]);
    }

    #[test]
    fn worsened_cases_rank_last_with_negative_improvement() {
        let s = set(FeatureSubset::Structured, vec![0.5, 0.5], vec![0, 0]);
        let c = set(FeatureSubset::Combined, vec![0.9, 0.2], vec![0, 0]);
        let sel = select_uncertain_improved(&s, &c, &UncertainSelectConfig::default()).unwrap();
        assert_eq!(sel.ids(), vec![1, 0]);
        assert!(sel.cases[1].improvement < 0.0);
    }

    #[test]
    fn misaligned_sets_are_rejected() {
        let s = set(FeatureSubset::Structured, vec![0.5, 0.5], vec![1, 1]);
        let mut c = set(FeatureSubset::Combined, vec![0.6, 0.6], vec![1, 1]);
        c.ids[1] = 99;
        let err = select_uncertain_improved(&s, &c, &UncertainSelectConfig::default()).unwrap_err();
        assert!(err.to_string().contains("record ids"));

        let mut c = set(FeatureSubset::Combined, vec![0.6, 0.6], vec![1, 1]);
        c.labels[0] = 0;
        let err = select_uncertain_improved(&s, &c, &UncertainSelectConfig::default()).unwrap_err();
        assert!(err.to_string().contains("labels"));
    }

    #[test]
    fn inverted_band_is_rejected() {
        let s = set(FeatureSubset::Structured, vec![0.5], vec![1]);
        let c = set(FeatureSubset::Combined, vec![0.6], vec![1]);
        let cfg = UncertainSelectConfig { band_lo: 0.7, band_hi: 0.3, top_n: 10 };
        let err = select_uncertain_improved(&s, &c, &cfg).unwrap_err();
        assert!(err.to_string().contains("not a valid interval"));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn selection_is_sorted_banded_and_bounded(
                scores_s in proptest::collection::vec(0.0f64..=1.0, 1..60),
                shift in proptest::collection::vec(-0.3f64..=0.3, 60),
                labels in proptest::collection::vec(0u8..=1, 60),
                top_n in 0usize..20,
            ) {
                let n = scores_s.len();
                let scores_c: Vec<f64> = scores_s
                    .iter()
                    .zip(&shift)
                    .map(|(&s, &d)| (s + d).clamp(0.0, 1.0))
                    .collect();
                let s = set(FeatureSubset::Structured, scores_s.clone(), labels[..n].to_vec());
                let c = set(FeatureSubset::Combined, scores_c, labels[..n].to_vec());
                let cfg = UncertainSelectConfig { top_n, ..Default::default() };
                let sel = select_uncertain_improved(&s, &c, &cfg).unwrap();

                let candidates =
                    scores_s.iter().filter(|&&v| (0.40..=0.60).contains(&v)).count();
                prop_assert_eq!(sel.cases.len(), candidates.min(top_n));
                for pair in sel.cases.windows(2) {
                    prop_assert!(
                        pair[0].improvement > pair[1].improvement
                            || (pair[0].improvement == pair[1].improvement
                                && pair[0].id < pair[1].id)
                    );
                }
                for case in &sel.cases {
                    prop_assert!((0.40..=0.60).contains(&case.structured));
                }
            }
        }
    }
}

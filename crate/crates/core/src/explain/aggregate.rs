//! Corpus-level ranking of word importance across many LIME explanations.
//!
//! Weights are grouped by stem after stopword removal; each document
//! contributes one value per stem (the sum of its member-word weights), and
//! a stem's impact is the mean over the documents containing it.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::explain::lime::LimeExplanation;

/// One ranked stem with its mean signed impact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregatedWord {
    pub stem: String,
    pub mean_impact: f64,
    /// Documents whose explanation mentioned the stem.
    pub n_docs: usize,
}

/// Top `top_k` stems by absolute mean impact, sign retained; ties break by
/// stem name so the ranking is fully deterministic.
pub fn aggregate_word_importance(
    explanations: &[LimeExplanation],
    stemmer: impl Fn(&str) -> String,
    stopwords: &BTreeSet<String>,
    top_k: usize,
) -> Vec<AggregatedWord> {
    let mut per_stem: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for exp in explanations {
        let mut doc_totals: BTreeMap<String, f64> = BTreeMap::new();
        for ww in &exp.words {
            if stopwords.contains(&ww.word) {
                continue;
            }
            *doc_totals.entry(stemmer(&ww.word)).or_insert(0.0) += ww.weight;
        }
        for (s, total) in doc_totals {
            per_stem.entry(s).or_default().push(total);
        }
    }

    let mut ranked: Vec<AggregatedWord> = per_stem
        .into_iter()
        .map(|(stem, mut values)| {
            // Order-independent summation keeps the aggregate invariant
            // under permutation of the explanation list.
            values.sort_by(f64::total_cmp);
            let mean_impact = values.iter().sum::<f64>() / values.len() as f64;
            AggregatedWord { stem, mean_impact, n_docs: values.len() }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.mean_impact
            .abs()
            .total_cmp(&a.mean_impact.abs())
            .then_with(|| a.stem.cmp(&b.stem))
    });
    ranked.truncate(top_k);
    ranked
}

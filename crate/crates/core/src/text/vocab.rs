//! Bag-of-words vocabulary with document-frequency screening.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Terms retained for TF-IDF, ordered by (descending df, term).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: BTreeMap<String, usize>,
    /// Fraction of training documents containing each term.
    df: Vec<f64>,
}

impl Vocabulary {
    /// Screen terms by document frequency: keep non-stopwords with
    /// df ∈ [min_df, max_df] (bounds inclusive).
    pub fn build(
        docs: &[Vec<String>],
        min_df: f64,
        max_df: f64,
        stopwords: &BTreeSet<String>,
    ) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::validation("cannot build a vocabulary from zero documents"));
        }
        if !(0.0..=1.0).contains(&min_df) || !(0.0..=1.0).contains(&max_df) || min_df > max_df {
            return Err(Error::config(format!(
                "document-frequency band [{min_df}, {max_df}] is not a sub-interval of [0,1]"
            )));
        }
        let n = docs.len() as f64;
        let mut doc_counts: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in docs {
            let distinct: BTreeSet<&str> = doc.iter().map(String::as_str).collect();
            for term in distinct {
                *doc_counts.entry(term).or_default() += 1;
            }
        }
        let mut retained: Vec<(String, f64)> = doc_counts
            .into_iter()
            .filter(|(term, _)| !stopwords.contains(*term))
            .map(|(term, count)| (term.to_string(), count as f64 / n))
            .filter(|(_, df)| (min_df..=max_df).contains(df))
            .collect();
        if retained.is_empty() {
            return Err(Error::validation(format!(
                "document-frequency screening [{min_df}, {max_df}] retained no terms; \
                 widen the thresholds"
            )));
        }
        retained.sort_by(|(ta, dfa), (tb, dfb)| {
            dfb.partial_cmp(dfa).unwrap().then_with(|| ta.cmp(tb))
        });
        let index = retained
            .iter()
            .enumerate()
            .map(|(i, (term, _))| (term.clone(), i))
            .collect();
        let (terms, df) = retained.into_iter().unzip();
        Ok(Vocabulary { terms, index, df })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn df(&self, index: usize) -> f64 {
        self.df[index]
    }
}

/// Baseline English stopword list; includes the negation words, so
/// bag-of-words features are blind to negation by construction.
pub fn default_stopwords() -> BTreeSet<String> {
    const WORDS: &[&str] = &[
        "a", "about", "above", "after", "again", "against", "all", "an", "and", "any", "are",
        "at", "be", "been", "being", "before", "below", "between", "both", "but", "by", "did",
        "do", "does", "doing", "down", "during", "each", "few", "for", "from", "further", "had",
        "has", "have", "having", "he", "her", "here", "his", "if", "in", "into", "is", "it",
        "its", "more", "most", "nor", "no", "not", "of", "off", "on", "once", "only", "or",
        "other", "out", "over", "own", "same", "she", "so", "some", "such", "than", "that",
        "the", "their", "them", "then", "there", "these", "they", "this", "those", "through",
        "to", "too", "under", "up", "very", "was", "were", "what", "which", "who", "whom",
        "with", "would",
    ];
    WORDS.iter().map(|w| w.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(specs: &[&[&str]]) -> Vec<Vec<String>> {
        specs.iter().map(|d| d.iter().map(|w| w.to_string()).collect()).collect()
    }

    fn no_stopwords() -> BTreeSet<String> {
        BTreeSet::new()
    }

    #[test]
    fn ubiquitous_term_excluded_by_max_df() {
        let corpus = docs(&[&["common", "rare"], &["common"], &["common"], &["common"]]);
        let vocab = Vocabulary::build(&corpus, 0.05, 0.30, &no_stopwords()).unwrap();
        assert!(vocab.index_of("common").is_none());
        assert!(vocab.index_of("rare").is_some());
    }

    #[test]
    fn band_arithmetic_matches_the_hundred_doc_example() {
        // 100 docs, term in 7 of them: 0.05 <= 0.07 <= 0.10 keeps it.
        let mut corpus = vec![vec!["keepme".to_string()]; 7];
        corpus.extend(vec![vec!["filler".to_string()]; 93]);
        let vocab = Vocabulary::build(&corpus, 0.05, 0.10, &no_stopwords()).unwrap();
        assert!(vocab.index_of("keepme").is_some());
        assert!(vocab.index_of("filler").is_none());
        assert_eq!(vocab.df(vocab.index_of("keepme").unwrap()), 0.07);
    }

    #[test]
    fn band_bounds_are_inclusive() {
        // df exactly 0.05 and exactly 0.10 on a 20-doc corpus.
        let mut corpus = vec![vec!["atmin".to_string()]];
        corpus.push(vec!["atmax".to_string(), "atmin2".to_string()]);
        corpus.push(vec!["atmax".to_string()]);
        corpus.extend(vec![vec!["x".to_string()]; 17]);
        let vocab = Vocabulary::build(&corpus, 0.05, 0.10, &no_stopwords()).unwrap();
        assert!(vocab.index_of("atmin").is_some(), "df = min_df must be kept");
        assert!(vocab.index_of("atmax").is_some(), "df = max_df must be kept");
    }

    #[test]
    fn stopwords_are_excluded_regardless_of_df() {
        let corpus = docs(&[&["the", "word"], &["other"], &["stuff"], &["stuff2"], &["s3"], &[
            "s4", "s5", "s6", "s7", "s8",
        ]]);
        let stops: BTreeSet<String> = ["the"].iter().map(|s| s.to_string()).collect();
        let vocab = Vocabulary::build(&corpus, 0.0, 1.0, &stops).unwrap();
        assert!(vocab.index_of("the").is_none());
        assert!(vocab.index_of("word").is_some());
    }

    #[test]
    fn ordering_is_by_descending_df_then_term() {
        let corpus = docs(&[
            &["bb", "aa"],
            &["bb", "cc"],
            &["bb", "aa", "dd"],
            &["zz"],
        ]);
        let vocab = Vocabulary::build(&corpus, 0.0, 1.0, &no_stopwords()).unwrap();
        assert_eq!(vocab.terms(), &["bb", "aa", "cc", "dd", "zz"]);
        let again = Vocabulary::build(&corpus, 0.0, 1.0, &no_stopwords()).unwrap();
        assert_eq!(vocab, again);
    }

    #[test]
    fn empty_retention_names_the_fix() {
        let corpus = docs(&[&["every"], &["every"]]);
        let err = Vocabulary::build(&corpus, 0.01, 0.02, &no_stopwords()).unwrap_err();
        assert!(err.to_string().contains("widen"), "got: {err}");
    }

    #[test]
    fn repeated_occurrences_count_once_per_document() {
        let corpus = docs(&[&["dup", "dup", "dup"], &["x"], &["y"], &["z"]]);
        let vocab = Vocabulary::build(&corpus, 0.0, 1.0, &no_stopwords()).unwrap();
        assert_eq!(vocab.df(vocab.index_of("dup").unwrap()), 0.25);
    }
}

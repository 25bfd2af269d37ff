//! TF-IDF weighting over a screened vocabulary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::vocab::Vocabulary;

/// Row normalization applied to document vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowNorm {
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub vocabulary: Vocabulary,
    /// Smoothed idf per term: ln((1+N)/(1+df_count)) + 1, always > 0.
    pub idf: Vec<f64>,
    pub norm: RowNorm,
}

/// Fit idf weights on the training documents the vocabulary came from.
pub fn fit_tfidf(docs: &[Vec<String>], vocabulary: Vocabulary) -> Result<TfidfModel> {
    if docs.is_empty() {
        return Err(Error::validation("cannot fit tf-idf on zero documents"));
    }
    let n = docs.len() as f64;
    let idf = (0..vocabulary.len())
        .map(|i| {
            // df stored as a fraction of N; recover the document count.
            let df_count = (vocabulary.df(i) * n).round();
            ((1.0 + n) / (1.0 + df_count)).ln() + 1.0
        })
        .collect();
    Ok(TfidfModel { vocabulary, idf, norm: RowNorm::L2 })
}

impl TfidfModel {
    /// Weight vector for one tokenized document: tf × idf, L2-normalized.
    /// A document sharing no terms with the vocabulary maps to the zero vector.
    pub fn transform(&self, tokens: &[String]) -> Vec<f64> {
        let mut weights = vec![0.0; self.vocabulary.len()];
        for token in tokens {
            if let Some(i) = self.vocabulary.index_of(token) {
                weights[i] += self.idf[i];
            }
        }
        let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for w in &mut weights {
                *w /= norm;
            }
        }
        weights
    }

    /// Transform a whole corpus into a row-major matrix.
    pub fn transform_all(&self, docs: &[Vec<String>]) -> Vec<Vec<f64>> {
        docs.iter().map(|d| self.transform(d)).collect()
    }
}

impl crate::model_io::ModelKind for TfidfModel {
    const KIND: &'static str = "tfidf";
    fn dims(&self) -> Vec<usize> {
        vec![self.vocabulary.len()]
    }
}

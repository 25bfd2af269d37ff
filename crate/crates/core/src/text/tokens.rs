//! Whole-word token ids and fixed-length sequence encoding for the encoder.
//!
//! Tokenization is whole-word on cleaned text, a deliberate simplification:
//! at this scale a subword vocabulary would mostly memorize the same words.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;
pub const MASK_ID: u32 = 3;
/// First id available to real words.
pub const FIRST_WORD_ID: u32 = 4;

/// Word-to-id table for the sequence encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenVocab {
    /// Words ordered by (descending corpus count, term); ids follow this order.
    terms: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl TokenVocab {
    /// Build from tokenized documents, keeping words seen at least `min_count`
    /// times across the corpus.
    pub fn fit(docs: &[Vec<String>], min_count: usize) -> Result<Self> {
        if min_count == 0 {
            return Err(Error::config("min_count must be at least 1"));
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in docs {
            for tok in doc {
                *counts.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> =
            counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
        if kept.is_empty() {
            return Err(Error::validation(
                "no token reaches min_count; lower the threshold",
            ));
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let terms: Vec<String> = kept.iter().map(|&(t, _)| t.to_string()).collect();
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), FIRST_WORD_ID + i as u32))
            .collect();
        Ok(Self { terms, index })
    }

    pub fn id_of(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    /// Total embedding-table size: specials plus words.
    pub fn table_size(&self) -> usize {
        FIRST_WORD_ID as usize + self.terms.len()
    }

    pub fn n_words(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

/// One fixed-length encoder input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    /// 1.0 for CLS and real tokens, 0.0 for padding.
    pub mask: Vec<f64>,
}

/// Encode a tokenized document as CLS + up to `max_len - 1` word ids, padded.
pub fn encode_for_transformer(
    tokens: &[String],
    vocab: &TokenVocab,
    max_len: usize,
) -> Result<TokenSequence> {
    if max_len < 2 {
        return Err(Error::config("max_len must fit CLS plus at least one token"));
    }
    let mut ids = Vec::with_capacity(max_len);
    let mut mask = Vec::with_capacity(max_len);
    ids.push(CLS_ID);
    mask.push(1.0);
    for tok in tokens.iter().take(max_len - 1) {
        ids.push(vocab.id_of(tok));
        mask.push(1.0);
    }
    while ids.len() < max_len {
        ids.push(PAD_ID);
        mask.push(0.0);
    }
    Ok(TokenSequence { ids, mask })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ids_follow_count_then_term_order() {
        let docs = vec![
            toks(&["b", "b", "a", "c"]),
            toks(&["b", "a", "c", "c"]),
        ];
        let vocab = TokenVocab::fit(&docs, 1).unwrap();
        // b and c both appear 3 times; b wins the alphabetical tie.
        assert_eq!(vocab.terms(), &["b", "c", "a"]);
        assert_eq!(vocab.id_of("b"), 4);
        assert_eq!(vocab.id_of("c"), 5);
        assert_eq!(vocab.id_of("a"), 6);
        assert_eq!(vocab.id_of("zzz"), UNK_ID);
        assert_eq!(vocab.table_size(), 7);
    }

    #[test]
    fn min_count_filters_rare_words() {
        let docs = vec![toks(&["keep", "keep", "drop"])];
        let vocab = TokenVocab::fit(&docs, 2).unwrap();
        assert_eq!(vocab.terms(), &["keep"]);
        assert_eq!(vocab.id_of("drop"), UNK_ID);
        assert!(TokenVocab::fit(&docs, 5).is_err());
    }

    #[test]
    fn long_document_truncates_to_max_len() {
        let doc: Vec<String> = (0..600).map(|i| format!("w{i}")).collect();
        let vocab = TokenVocab::fit(&[doc.clone()], 1).unwrap();
        let seq = encode_for_transformer(&doc, &vocab, 512).unwrap();
        assert_eq!(seq.ids.len(), 512);
        assert_eq!(seq.ids[0], CLS_ID);
        assert!(seq.ids.iter().all(|&id| id != PAD_ID));
        assert_eq!(seq.mask.iter().sum::<f64>(), 512.0);
    }

    #[test]
    fn empty_document_is_cls_plus_padding() {
        let vocab = TokenVocab::fit(&[toks(&["word"])], 1).unwrap();
        let seq = encode_for_transformer(&[], &vocab, 8).unwrap();
        assert_eq!(seq.ids[0], CLS_ID);
        assert!(seq.ids[1..].iter().all(|&id| id == PAD_ID));
        assert_eq!(seq.mask.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn known_tokens_fill_mask() {
        let doc: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
        let vocab = TokenVocab::fit(&[doc.clone()], 1).unwrap();
        let seq = encode_for_transformer(&doc, &vocab, 16).unwrap();
        assert_eq!(seq.mask.iter().sum::<f64>(), 11.0);
        assert_eq!(seq.ids.iter().filter(|&&id| id == PAD_ID).count(), 5);
        assert!(seq.ids[1..11].iter().all(|&id| id >= FIRST_WORD_ID));
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let vocab = TokenVocab::fit(&[toks(&["known"])], 1).unwrap();
        let seq =
            encode_for_transformer(&toks(&["known", "mystery"]), &vocab, 4).unwrap();
        assert_eq!(seq.ids, vec![CLS_ID, 4, UNK_ID, PAD_ID]);
        assert_eq!(seq.mask, vec![1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn special_ids_are_stable() {
        assert_eq!((PAD_ID, UNK_ID, CLS_ID, MASK_ID), (0, 1, 2, 3));
    }
}

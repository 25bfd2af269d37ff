//! Text pipeline: cleaning, vocabulary, TF-IDF, LSA, token sequences, stemming.

pub mod clean;
pub mod lsa;
pub mod stem;
pub mod tfidf;
pub mod tokens;
pub mod vocab;

pub use clean::{clean_text, tokenize};
pub use lsa::{
    fit_lsa, fit_lsa_fixed, fit_lsa_matrix, fit_lsa_matrix_fixed, LsaComponents, LsaModel,
};
pub use stem::stem;
pub use tfidf::{fit_tfidf, RowNorm, TfidfModel};
pub use tokens::{
    encode_for_transformer, TokenSequence, TokenVocab, CLS_ID, FIRST_WORD_ID, MASK_ID, PAD_ID,
    UNK_ID,
};
pub use vocab::{default_stopwords, Vocabulary};

//! Model explanation: permutation importance, the structured-vs-combined
//! importance shift, uncertain-case selection, word-removal LIME and the
//! corpus-level word ranking built from it.

pub mod aggregate;
pub mod cases;
pub mod lime;
pub mod permutation;

pub use aggregate::{aggregate_word_importance, AggregatedWord};
pub use cases::{
    select_uncertain_improved, UncertainCase, UncertainCaseSelection, UncertainSelectConfig,
};
pub use lime::{lime_text, LimeConfig, LimeExplanation, WordWeight};
pub use permutation::{
    importance_shift, permutation_importance, ColumnData, FeatureImportance, ImportanceShift,
    ImportanceShiftRow, PermutationColumn, PermutationImportanceReport, TEXT_FEATURE_LABEL,
};

//! Suffix-stripping stemmer for word-importance aggregation.
//!
//! One pass over a fixed suffix table, longest suffix first; a rule applies
//! only when it leaves a stem of at least three characters. Words matching no
//! rule pass through unchanged, which is the right behaviour for the planted
//! vocabulary: grouping morphological variants matters, linguistic perfection
//! does not.

/// (suffix, replacement), ordered longest suffix first so e.g. "ments" is
/// tried before "ment" before "s".
const SUFFIX_RULES: &[(&str, &str)] = &[
    ("ments", ""),
    ("tions", ""),
    ("ings", ""),
    ("ment", ""),
    ("tion", ""),
    ("ness", ""),
    ("ies", "y"),
    ("ied", "y"),
    ("ing", ""),
    ("ed", ""),
    ("es", ""),
    ("er", ""),
    ("ly", ""),
    ("s", ""),
];

const MIN_STEM_LEN: usize = 3;

/// Stem one lowercase word.
pub fn stem(word: &str) -> String {
    for &(suffix, replacement) in SUFFIX_RULES {
        if let Some(base) = word.strip_suffix(suffix) {
            if base.chars().count() < MIN_STEM_LEN {
                continue;
            }
            // Plain "s" stripping skips -ss/-us words (glass, surplus).
            if suffix == "s" && (base.ends_with('s') || base.ends_with('u')) {
                continue;
            }
            return format!("{base}{replacement}");
        }
    }
    word.to_string()
}

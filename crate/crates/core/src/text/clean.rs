//! Text normalization ahead of tokenization.

/// Lowercase, split punctuation into standalone tokens, collapse whitespace.
///
/// The output is a single-space-separated token stream, so a later
/// `split_whitespace` yields the final tokens directly.
pub fn clean_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for ch in raw.chars() {
        if ch.is_alphanumeric() {
            out.extend(ch.to_lowercase());
        } else if ch.is_whitespace() {
            out.push(' ');
        } else {
            // Punctuation becomes its own token.
            out.push(' ');
            out.push(ch);
            out.push(' ');
        }
    }
    let mut collapsed = String::with_capacity(out.len());
    for token in out.split_whitespace() {
        if !collapsed.is_empty() {
            collapsed.push(' ');
        }
        collapsed.push_str(token);
    }
    collapsed
}

/// Clean and split in one step.
pub fn tokenize(raw: &str) -> Vec<String> {
    clean_text(raw).split_whitespace().map(String::from).collect()
}

//! Tokenization shared by the chunker, the hashing embedder and the offline
//! rule backend. Whitespace tokens for chunking; lowercase alphanumeric terms
//! for matching and hashing.

/// Whitespace tokens, as counted by the chunker.
pub fn whitespace_tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Lowercased alphanumeric terms with punctuation stripped.
pub fn terms(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Lowercased text with every non-alphanumeric run collapsed to one space and
/// a space on both ends, so phrase lookups can match on word boundaries with
/// `contains(" phrase ")`.
pub fn padded(text: &str) -> String {
    let mut out = String::from(" ");
    out.push_str(&terms(text).join(" "));
    out.push(' ');
    out
}

/// True when `phrase` (already in term form) occurs in the padded text on word
/// boundaries. A trailing `*` on the phrase allows any word suffix.
pub fn has_phrase(padded_text: &str, phrase: &str) -> bool {
    if let Some(stem) = phrase.strip_suffix('*') {
        padded_text.contains(&format!(" {stem}"))
    } else {
        padded_text.contains(&format!(" {phrase} "))
    }
}

/// Upper-cases the first character.
pub fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

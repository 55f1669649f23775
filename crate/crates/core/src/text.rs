//! Small text helpers shared across modules.
//!
//! All spans in this crate are measured in Unicode scalar values (chars),
//! not bytes, so they line up with offsets produced by Python-side servers.

use std::ops::Range;

/// The one case fold used for every lookup and comparison: trim, then
/// Unicode lowercase.
pub fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Collapses runs of whitespace to single spaces and trims the ends.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Slices `s` by a char range. Out-of-range ends are clamped.
pub fn char_slice(s: &str, range: Range<usize>) -> &str {
    let start = byte_index(s, range.start);
    let end = byte_index(s, range.end.max(range.start));
    &s[start..end]
}

fn byte_index(s: &str, char_idx: usize) -> usize {
    s.char_indices()
        .nth(char_idx)
        .map(|(b, _)| b)
        .unwrap_or(s.len())
}

/// True when every char of a non-empty string is punctuation or a symbol.
pub fn is_punctuation(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace()))
}

/// Word boundary test used for span alignment: start/end of text,
/// whitespace, or punctuation.
pub(crate) fn is_boundary_char(c: Option<char>) -> bool {
    match c {
        None => true,
        Some(c) => c.is_whitespace() || (!c.is_alphanumeric() && c != '-' && c != '\''),
    }
}

fn chars_eq_folded(a: char, b: char) -> bool {
    a == b || a.to_lowercase().eq(b.to_lowercase())
}

/// Finds the first case-insensitive occurrence of `word` in `text` that sits
/// on word boundaries. Returns a char range.
pub fn find_word(text: &str, word: &str) -> Option<Range<usize>> {
    let hay: Vec<char> = text.chars().collect();
    let needle: Vec<char> = word.trim().chars().collect();
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    (0..=hay.len() - needle.len()).find_map(|start| {
        let end = start + needle.len();
        let matches = hay[start..end]
            .iter()
            .zip(&needle)
            .all(|(&a, &b)| chars_eq_folded(a, b));
        let before = start.checked_sub(1).map(|i| hay[i]);
        let after = hay.get(end).copied();
        (matches && is_boundary_char(before) && is_boundary_char(after)).then_some(start..end)
    })
}

/// Upper- or lower-cases only the first char.
pub fn with_first_case(s: &str, upper: bool) -> String {
    let mut chars = s.chars();
    match chars.next() {
        None => String::new(),
        Some(first) => {
            let head: String = if upper {
                first.to_uppercase().collect()
            } else {
                first.to_lowercase().collect()
            };
            head + chars.as_str()
        }
    }
}

pub fn starts_uppercase(s: &str) -> bool {
    s.chars().next().is_some_and(char::is_uppercase)
}

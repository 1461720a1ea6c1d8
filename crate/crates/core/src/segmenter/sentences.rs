use std::collections::HashSet;
use std::ops::Range;
use std::path::Path;

use super::tokenize::is_punctuation;

const DEFAULT_ABBREVIATIONS: &str = include_str!("../../data/abbreviations_cs.txt");

/// Lower-cased abbreviations (with their trailing period) that suppress a
/// sentence boundary.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Abbreviations(HashSet<String>);

impl Abbreviations {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The bundled Czech list.
    pub fn czech() -> Self {
        Self::parse(DEFAULT_ABBREVIATIONS)
    }

    pub fn parse(content: &str) -> Self {
        Self(
            content
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| {
                    let mut entry = l.to_lowercase();
                    if !entry.ends_with('.') {
                        entry.push('.');
                    }
                    entry
                })
                .collect(),
        )
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn insert(&mut self, abbreviation: &str) {
        let mut entry = abbreviation.to_lowercase();
        if !entry.ends_with('.') {
            entry.push('.');
        }
        self.0.insert(entry);
    }

    pub fn contains(&self, word_with_period: &str) -> bool {
        self.0.contains(&word_with_period.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

fn is_closing(c: char) -> bool {
    matches!(c, ')' | ']' | '"' | '\'' | '“' | '”' | '’' | '»' | '›')
}

fn is_opening(c: char) -> bool {
    matches!(c, '(' | '[' | '"' | '\'' | '„' | '“' | '‚' | '‘' | '«' | '‹')
}

/// Rule-based sentence boundaries.
///
/// A boundary follows a cluster of `.`, `!`, `?` or `…` (plus closing
/// quotes/brackets) when it is followed by whitespace and then an uppercase
/// letter or digit, optionally behind an opening quote. A lone period that
/// ends a listed abbreviation never closes a sentence. Returned ranges are
/// byte ranges trimmed of surrounding whitespace; whitespace-only input
/// yields no ranges.
pub fn split_sentences(text: &str, abbreviations: &Abbreviations) -> Vec<Range<usize>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |k: usize| chars.get(k).map_or(text.len(), |&(b, _)| b);
    let mut cuts = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !is_terminal(c) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && is_terminal(chars[j].1) {
            j += 1;
        }
        let lone_period = c == '.' && j == i + 1;
        while j < chars.len() && is_closing(chars[j].1) {
            j += 1;
        }
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        if k > j && k < chars.len() {
            let next = chars[k].1;
            let starts_sentence = next.is_uppercase()
                || next.is_ascii_digit()
                || (is_opening(next) && chars.get(k + 1).is_some_and(|&(_, c)| c.is_uppercase()));
            if starts_sentence && !(lone_period && ends_abbreviation(text, pos, abbreviations)) {
                cuts.push(byte_at(j));
            }
        }
        i = j.max(i + 1);
    }

    let mut ranges = Vec::with_capacity(cuts.len() + 1);
    let mut from = 0;
    for cut in cuts.into_iter().chain(std::iter::once(text.len())) {
        if let Some(range) = trimmed(text, from..cut) {
            ranges.push(range);
        }
        from = cut;
    }
    ranges
}

fn ends_abbreviation(text: &str, period: usize, abbreviations: &Abbreviations) -> bool {
    let before = &text[..period];
    let word_start = before
        .char_indices()
        .rev()
        .find(|&(_, c)| c.is_whitespace())
        .map_or(0, |(i, c)| i + c.len_utf8());
    let word = before[word_start..].trim_start_matches(|c: char| is_opening(c) || is_punctuation(c));
    !word.is_empty() && abbreviations.contains(&format!("{word}."))
}

fn trimmed(text: &str, range: Range<usize>) -> Option<Range<usize>> {
    let slice = &text[range.clone()];
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    if lead == slice.len() {
        return None;
    }
    Some(range.start + lead..range.end - trail)
}

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segmenter::{tokenize, Segment};

/// Characters compared by `lemma_prefix` matching.
pub const LEMMA_PREFIX_LEN: usize = 5;

#[derive(Debug, Error)]
pub enum GlossaryError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate entry for `{term}` in domain `{domain}`")]
    Duplicate { line: usize, term: String, domain: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    #[default]
    Exact,
    LemmaPrefix,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlossaryEntry {
    pub source_term: String,
    pub target_term: String,
    pub domain: String,
    #[serde(rename = "match")]
    pub match_mode: MatchMode,
    /// Known wrong renderings of the term.
    #[serde(default)]
    pub wrong_variants: Vec<String>,
}

impl GlossaryEntry {
    pub fn new(source_term: &str, target_term: &str, domain: &str, match_mode: MatchMode) -> Self {
        Self {
            source_term: source_term.into(),
            target_term: target_term.into(),
            domain: domain.into(),
            match_mode,
            wrong_variants: Vec::new(),
        }
    }

    pub fn with_wrong_variant(mut self, variant: &str) -> Self {
        self.wrong_variants.push(variant.into());
        self
    }

    fn applies_to(&self, domain: &str) -> bool {
        self.domain.is_empty() || self.domain == "*" || self.domain.eq_ignore_ascii_case(domain)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Glossary {
    pub entries: Vec<GlossaryEntry>,
}

impl Glossary {
    pub fn new(entries: Vec<GlossaryEntry>) -> Result<Self, GlossaryError> {
        let mut g = Self::default();
        for (n, e) in entries.into_iter().enumerate() {
            g.push(e, n + 1)?;
        }
        Ok(g)
    }

    fn push(&mut self, entry: GlossaryEntry, line: usize) -> Result<(), GlossaryError> {
        let clash = self.entries.iter().any(|e| {
            e.source_term.to_lowercase() == entry.source_term.to_lowercase() && e.domain == entry.domain
        });
        if clash {
            return Err(GlossaryError::Duplicate {
                line,
                term: entry.source_term,
                domain: entry.domain,
            });
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// TSV with columns `source`, `target`, `domain`, `match_mode` and an
    /// optional fifth column of `;`-separated wrong variants. Blank lines,
    /// `#` comments and a `source<TAB>target...` header are skipped.
    pub fn parse_tsv(content: &str) -> Result<Self, GlossaryError> {
        let mut g = Self::default();
        for (n, line) in content.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if n == 0 && cols[0].eq_ignore_ascii_case("source") {
                continue;
            }
            if !(4..=5).contains(&cols.len()) {
                return Err(GlossaryError::Syntax {
                    line: line_no,
                    message: format!("expected 4 or 5 columns, got {}", cols.len()),
                });
            }
            if cols[0].is_empty() || cols[1].is_empty() {
                return Err(GlossaryError::Syntax {
                    line: line_no,
                    message: "empty term".into(),
                });
            }
            let match_mode = match cols[3] {
                "exact" => MatchMode::Exact,
                "lemma_prefix" => MatchMode::LemmaPrefix,
                other => {
                    return Err(GlossaryError::Syntax {
                        line: line_no,
                        message: format!("unknown match mode `{other}`"),
                    })
                }
            };
            let wrong_variants = cols
                .get(4)
                .map(|v| v.split(';').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
                .unwrap_or_default();
            g.push(
                GlossaryEntry {
                    source_term: cols[0].into(),
                    target_term: cols[1].into(),
                    domain: cols[2].into(),
                    match_mode,
                    wrong_variants,
                },
                line_no,
            )?;
        }
        Ok(g)
    }

    pub fn load_tsv(path: &Path) -> Result<Self, GlossaryError> {
        let content = std::fs::read_to_string(path).map_err(|source| GlossaryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_tsv(&content)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermStatus {
    Ok,
    Missing,
    Mismatched,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermFinding {
    pub segment_id: String,
    pub source_term: String,
    pub expected_target: String,
    pub status: TermStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub found_text: Option<String>,
}

struct Words {
    folded: Vec<String>,
    spans: Vec<(usize, usize)>,
}

fn words(text: &str) -> Words {
    let tokens = tokenize(text);
    Words {
        folded: tokens.iter().map(|t| t.text.to_lowercase()).collect(),
        spans: tokens.iter().map(|t| (t.start, t.end)).collect(),
    }
}

fn word_matches(term: &str, word: &str, mode: MatchMode) -> bool {
    match mode {
        MatchMode::LemmaPrefix if term.chars().count() >= LEMMA_PREFIX_LEN => {
            word.chars().count() >= LEMMA_PREFIX_LEN
                && term.chars().take(LEMMA_PREFIX_LEN).eq(word.chars().take(LEMMA_PREFIX_LEN))
        }
        _ => term == word,
    }
}

/// Start indices where `term` occurs as a contiguous word sequence.
fn occurrences(term: &[String], text: &[String], mode: MatchMode) -> Vec<usize> {
    if term.is_empty() || term.len() > text.len() {
        return Vec::new();
    }
    (0..=text.len() - term.len())
        .filter(|&i| term.iter().zip(&text[i..]).all(|(t, w)| word_matches(t, w, mode)))
        .collect()
}

fn find_in(text: &str, hyp: &Words, phrase: &str, mode: MatchMode) -> Option<String> {
    let term = words(phrase).folded;
    occurrences(&term, &hyp.folded, mode).first().map(|&i| {
        let from = hyp.spans[i].0;
        let to = hyp.spans[i + term.len() - 1].1;
        text[from..to].to_string()
    })
}

pub fn check_terminology(src: &Segment, hypothesis: &str, glossary: &Glossary, domain: &str) -> Vec<TermFinding> {
    check_terminology_text(&src.segment_id, &src.text, hypothesis, glossary, domain)
}

/// One finding per glossary entry whose source term occurs in the source
/// text. Longer terms claim their words first, so a word already covered
/// by a longer match does not also trigger a shorter entry.
pub fn check_terminology_text(
    segment_id: &str,
    source: &str,
    hypothesis: &str,
    glossary: &Glossary,
    domain: &str,
) -> Vec<TermFinding> {
    let src = words(source);
    let hyp = words(hypothesis);
    let mut entries: Vec<(usize, &GlossaryEntry, Vec<String>)> = glossary
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.applies_to(domain))
        .map(|(i, e)| (i, e, words(&e.source_term).folded))
        .filter(|(_, _, t)| !t.is_empty())
        .collect();
    entries.sort_by(|a, b| {
        b.2.len()
            .cmp(&a.2.len())
            .then(b.1.source_term.chars().count().cmp(&a.1.source_term.chars().count()))
            .then(a.0.cmp(&b.0))
    });

    let mut claimed: HashSet<usize> = HashSet::new();
    let mut found: Vec<(usize, usize, TermFinding)> = Vec::new();
    for (order, entry, term) in entries {
        let hit = occurrences(&term, &src.folded, entry.match_mode)
            .into_iter()
            .find(|&i| (i..i + term.len()).all(|k| !claimed.contains(&k)));
        let Some(start) = hit else {
            continue;
        };
        claimed.extend(start..start + term.len());
        let (status, found_text) = match find_in(hypothesis, &hyp, &entry.target_term, entry.match_mode) {
            Some(text) => (TermStatus::Ok, Some(text)),
            None => match entry
                .wrong_variants
                .iter()
                .find_map(|v| find_in(hypothesis, &hyp, v, entry.match_mode))
            {
                Some(text) => (TermStatus::Mismatched, Some(text)),
                None => (TermStatus::Missing, None),
            },
        };
        found.push((
            start,
            order,
            TermFinding {
                segment_id: segment_id.into(),
                source_term: entry.source_term.clone(),
                expected_target: entry.target_term.clone(),
                status,
                found_text,
            },
        ));
    }
    found.sort_by_key(|(start, order, _)| (*start, *order));
    found.into_iter().map(|(_, _, f)| f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn galls() -> Glossary {
        Glossary::new(vec![
            GlossaryEntry::new("hálky", "гали", "biology", MatchMode::Exact).with_wrong_variant("жовна")
        ])
        .unwrap()
    }

    #[test]
    fn ok_missing_mismatched() {
        let g = galls();
        let ok = check_terminology_text("1", "Hálky na rostlinách", "Гали на рослинах", &g, "biology");
        assert_eq!(ok[0].status, TermStatus::Ok);
        assert_eq!(ok[0].found_text.as_deref(), Some("Гали"));
        let missing = check_terminology_text("1", "Hálky na rostlinách", "Нарости на рослинах", &g, "biology");
        assert_eq!(missing[0].status, TermStatus::Missing);
        let wrong = check_terminology_text("1", "Hálky na rostlinách", "Жовна на рослинах", &g, "biology");
        assert_eq!(wrong[0].status, TermStatus::Mismatched);
    }

    #[test]
    fn absent_terms_and_empty_glossary() {
        assert!(check_terminology_text("1", "Listy", "Листя", &galls(), "biology").is_empty());
        assert!(check_terminology_text("1", "hálky", "гали", &Glossary::default(), "biology").is_empty());
        assert!(check_terminology_text("1", "hálky", "гали", &galls(), "chemistry").is_empty());
    }

    #[test]
    fn longest_match_claims_words() {
        let g = Glossary::new(vec![
            GlossaryEntry::new("kyselina", "кислота", "chemistry", MatchMode::Exact),
            GlossaryEntry::new("kyselina sírová", "сірчана кислота", "chemistry", MatchMode::Exact),
        ])
        .unwrap();
        let f = check_terminology_text("1", "Kyselina sírová je silná.", "Сірчана кислота сильна.", &g, "chemistry");
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].source_term, "kyselina sírová");
        assert_eq!(f[0].status, TermStatus::Ok);
    }

    #[test]
    fn lemma_prefix_matches_inflections() {
        let g = Glossary::new(vec![GlossaryEntry::new("fotosyntéza", "фотосинтез", "biology", MatchMode::LemmaPrefix)])
            .unwrap();
        let f = check_terminology_text("1", "Při fotosyntéze rostlina", "Під час фотосинтезу рослина", &g, "biology");
        assert_eq!(f[0].status, TermStatus::Ok);
        assert_eq!(f[0].found_text.as_deref(), Some("фотосинтезу"));
    }

    #[test]
    fn tsv_parsing() {
        let g = Glossary::parse_tsv("source\ttarget\tdomain\tmatch_mode\nhálky\tгали\tbiology\texact\tжовна; нарости\n")
            .unwrap();
        assert_eq!(g.entries[0].wrong_variants, ["жовна", "нарости"]);
        assert!(matches!(
            Glossary::parse_tsv("a\tb\tc\n"),
            Err(GlossaryError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            Glossary::parse_tsv("a\tb\tc\tfuzzy\n"),
            Err(GlossaryError::Syntax { .. })
        ));
        assert!(matches!(
            Glossary::parse_tsv("a\tb\tc\texact\nA\tx\tc\texact\n"),
            Err(GlossaryError::Duplicate { line: 2, .. })
        ));
    }
}

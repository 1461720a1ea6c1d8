//! Translation backends and terminology checking.
//!
//! Alignments returned by a backend index the tokens produced by
//! [`tokenize`](crate::segmenter::tokenize) on the source and target
//! strings.

mod glossary;
mod remote;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aligner::{AlignmentLinks, Link};
use crate::segmenter::{is_punctuation, tokenize};

pub use glossary::{
    check_terminology, check_terminology_text, Glossary, GlossaryEntry, GlossaryError, MatchMode, TermFinding,
    TermStatus, LEMMA_PREFIX_LEN,
};
pub use remote::{RemoteBackend, RemoteConfig};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("language pair {src}->{tgt} is not supported")]
    UnsupportedPair { src: String, tgt: String },
    #[error("backend unavailable: {message}")]
    Unavailable { retryable: bool, message: String },
    #[error("backend timed out")]
    Timeout,
    #[error("backend rejected credentials: {0}")]
    Auth(String),
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRequest {
    pub segments: Vec<String>,
    pub source_lang: String,
    pub target_lang: String,
    #[serde(default)]
    pub want_alignment: bool,
}

impl TranslationRequest {
    pub fn new(segments: Vec<String>, source_lang: &str, target_lang: &str) -> Self {
        Self {
            segments,
            source_lang: source_lang.into(),
            target_lang: target_lang.into(),
            want_alignment: true,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.segments.is_empty() {
            return Err(BackendError::InvalidRequest("no segments".into()));
        }
        if self.source_lang.eq_ignore_ascii_case(&self.target_lang) {
            return Err(BackendError::InvalidRequest("source and target language are the same".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationResult {
    pub translations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignments: Option<Vec<AlignmentLinks>>,
    pub backend_id: String,
    pub latency_ms: u64,
}

#[async_trait]
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    fn supports(&self, source_lang: &str, target_lang: &str) -> bool;

    /// Translates every segment, keeping order and length.
    async fn translate_batch(&self, request: &TranslationRequest) -> Result<TranslationResult, BackendError>;

    async fn health(&self) -> bool {
        true
    }
}

fn check_pair(backend: &dyn Backend, request: &TranslationRequest) -> Result<(), BackendError> {
    request.validate()?;
    if !backend.supports(&request.source_lang, &request.target_lang) {
        return Err(BackendError::UnsupportedPair {
            src: request.source_lang.clone(),
            tgt: request.target_lang.clone(),
        });
    }
    Ok(())
}

/// Returns every segment unchanged with a diagonal alignment.
#[derive(Debug, Clone, Default)]
pub struct IdentityBackend;

#[async_trait]
impl Backend for IdentityBackend {
    fn id(&self) -> &str {
        "identity"
    }

    fn supports(&self, source_lang: &str, target_lang: &str) -> bool {
        !source_lang.is_empty() && !target_lang.is_empty()
    }

    async fn translate_batch(&self, request: &TranslationRequest) -> Result<TranslationResult, BackendError> {
        check_pair(self, request)?;
        let alignments = request
            .want_alignment
            .then(|| request.segments.iter().map(|s| AlignmentLinks::diagonal(tokenize(s).len())).collect());
        Ok(TranslationResult {
            translations: request.segments.clone(),
            alignments,
            backend_id: self.id().into(),
            latency_ms: 0,
        })
    }
}

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected source<TAB>target")]
    Syntax { line: usize },
}

/// Word-for-word lookup. Words are matched case-insensitively and the
/// capitalization of the source word is carried over; unknown words are
/// copied and left unaligned. Punctuation is copied and aligned to itself.
#[derive(Debug, Clone)]
pub struct DictionaryBackend {
    source_lang: String,
    target_lang: String,
    entries: HashMap<String, String>,
}

fn carry_case(source: &str, target: &str) -> String {
    let mut chars = source.chars();
    let first_upper = chars.next().is_some_and(char::is_uppercase);
    let all_upper = source.chars().count() > 1 && source.chars().all(|c| !c.is_lowercase());
    if all_upper {
        target.to_uppercase()
    } else if first_upper {
        let mut t = target.chars();
        t.next()
            .map(|c| c.to_uppercase().chain(t).collect())
            .unwrap_or_default()
    } else {
        target.to_string()
    }
}

impl DictionaryBackend {
    pub fn new(source_lang: &str, target_lang: &str) -> Self {
        Self {
            source_lang: source_lang.into(),
            target_lang: target_lang.into(),
            entries: HashMap::new(),
        }
    }

    pub fn with_entry(mut self, source: &str, target: &str) -> Self {
        self.insert(source, target);
        self
    }

    pub fn insert(&mut self, source: &str, target: &str) {
        self.entries.insert(source.to_lowercase(), target.to_string());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `source<TAB>target` per line; `#` starts a comment line.
    pub fn parse_tsv(content: &str, source_lang: &str, target_lang: &str) -> Result<Self, DictionaryError> {
        let mut out = Self::new(source_lang, target_lang);
        for (n, line) in content.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (s, t) = line.split_once('\t').ok_or(DictionaryError::Syntax { line: n + 1 })?;
            if s.trim().is_empty() {
                return Err(DictionaryError::Syntax { line: n + 1 });
            }
            out.insert(s.trim(), t.trim());
        }
        Ok(out)
    }

    pub fn load_tsv(path: &Path, source_lang: &str, target_lang: &str) -> Result<Self, DictionaryError> {
        let content = std::fs::read_to_string(path).map_err(|source| DictionaryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_tsv(&content, source_lang, target_lang)
    }

    /// Translation of one segment and its alignment.
    pub fn translate_one(&self, segment: &str) -> (String, AlignmentLinks) {
        let src = tokenize(segment);
        let mut out = String::new();
        let mut pieces = Vec::with_capacity(src.len());
        let mut prev_end = 0;
        for tok in &src {
            out.push_str(&segment[prev_end..tok.start]);
            let start = out.len();
            let hit = self.entries.get(&tok.text.to_lowercase());
            let linked = hit.is_some() || tok.text.chars().all(is_punctuation);
            match hit {
                Some(t) => out.push_str(&carry_case(&tok.text, t)),
                None => out.push_str(&tok.text),
            }
            pieces.push((start..out.len(), linked));
            prev_end = tok.end;
        }
        out.push_str(&segment[prev_end..]);

        let tgt = tokenize(&out);
        let mut links = AlignmentLinks::new(src.len(), tgt.len());
        for (j, t) in tgt.iter().enumerate() {
            let owner = pieces
                .iter()
                .position(|(r, _)| r.start <= t.start && t.end <= r.end);
            match owner {
                Some(i) if pieces[i].1 => links.insert(Link::new(i, j)),
                _ => links.insert(Link::null(j)),
            }
        }
        (out, links)
    }
}

#[async_trait]
impl Backend for DictionaryBackend {
    fn id(&self) -> &str {
        "dictionary"
    }

    fn supports(&self, source_lang: &str, target_lang: &str) -> bool {
        self.source_lang.eq_ignore_ascii_case(source_lang) && self.target_lang.eq_ignore_ascii_case(target_lang)
    }

    async fn translate_batch(&self, request: &TranslationRequest) -> Result<TranslationResult, BackendError> {
        let started = Instant::now();
        check_pair(self, request)?;
        let (translations, alignments): (Vec<_>, Vec<_>) =
            request.segments.iter().map(|s| self.translate_one(s)).unzip();
        Ok(TranslationResult {
            translations,
            alignments: request.want_alignment.then_some(alignments),
            backend_id: self.id().into(),
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(segments: &[&str]) -> TranslationRequest {
        TranslationRequest::new(segments.iter().map(|s| s.to_string()).collect(), "cs", "uk")
    }

    #[tokio::test]
    async fn identity_backend() {
        let r = IdentityBackend.translate_batch(&req(&["abc", ""])).await.unwrap();
        assert_eq!(r.translations, ["abc", ""]);
        assert_eq!(r.alignments.unwrap()[0], AlignmentLinks::diagonal(1));
    }

    #[tokio::test]
    async fn dictionary_lookup_and_oov() {
        let d = DictionaryBackend::new("cs", "uk").with_entry("pes", "собака");
        let r = d.translate_batch(&req(&["pes", "Pes a kočka.", ""])).await.unwrap();
        assert_eq!(r.translations, ["собака", "Собака a kočka.", ""]);
        let links = &r.alignments.unwrap()[1];
        assert!(links.contains(0, 0));
        assert!(links.links.contains(&Link::null(1)));
        assert!(links.links.contains(&Link::null(2)));
        assert!(links.contains(3, 3));
        assert!(links.is_complete());
    }

    #[tokio::test]
    async fn multiword_entries_link_every_piece() {
        let d = DictionaryBackend::new("cs", "uk").with_entry("hálky", "галові утворення");
        let (text, links) = d.translate_one("Hálky rostou");
        assert_eq!(text, "Галові утворення rostou");
        assert_eq!(links.targets_of(0), [0, 1]);
    }

    #[tokio::test]
    async fn pair_checks() {
        let d = DictionaryBackend::new("cs", "uk");
        let mut r = req(&["x"]);
        r.target_lang = "de".into();
        assert!(matches!(d.translate_batch(&r).await, Err(BackendError::UnsupportedPair { .. })));
        assert!(matches!(
            IdentityBackend.translate_batch(&req(&[])).await,
            Err(BackendError::InvalidRequest(_))
        ));
    }

    #[test]
    fn dictionary_tsv() {
        let d = DictionaryBackend::parse_tsv("# cs\tuk\npes\tсобака\nKočka\tкішка\n", "cs", "uk").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.translate_one("kočka").0, "кішка");
        assert!(DictionaryBackend::parse_tsv("nonsense\n", "cs", "uk").is_err());
    }

    #[test]
    fn case_is_carried_over() {
        assert_eq!(carry_case("Pes", "собака"), "Собака");
        assert_eq!(carry_case("PES", "собака"), "СОБАКА");
        assert_eq!(carry_case("pes", "Собака"), "Собака");
    }
}

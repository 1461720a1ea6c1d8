//! Document translation: parse, extract, translate, align, project,
//! reinsert.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aligner::{symmetrize, viterbi_align, AlignmentLinks, LexiconTable, Link, Symmetrization};
use crate::backends::{check_terminology, Backend, BackendError, Glossary, TermFinding, TranslationRequest};
use crate::docmodel::{
    canonicalize, parse_document, serialize_to_string, DocError, DocFormat, Element, MarkupDocument,
};
use crate::segmenter::{
    extract_segments, reinsert_segments, tokenize, ExtractionPolicy, Segment, SegmentError, Token,
};
use crate::tagproject::{project_segment, ProjectionWarning, TranslatedSegment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Html,
    Xml,
    Text,
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputFormat::Html => "html",
            InputFormat::Xml => "xml",
            InputFormat::Text => "text",
        })
    }
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "html" => Ok(InputFormat::Html),
            "xml" => Ok(InputFormat::Xml),
            "text" | "txt" => Ok(InputFormat::Text),
            other => Err(format!("unknown format `{other}` (expected html, xml or text)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Markup(#[from] DocError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("backend returned {got} translations for {expected} segments")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslateOptions {
    pub format: InputFormat,
    pub source_lang: String,
    pub target_lang: String,
    pub domain: Option<String>,
    pub check_terms: bool,
}

impl TranslateOptions {
    pub fn new(format: InputFormat, source_lang: &str, target_lang: &str) -> Self {
        Self {
            format,
            source_lang: source_lang.into(),
            target_lang: target_lang.into(),
            domain: None,
            check_terms: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub segment_id: String,
    pub source_text: String,
    pub target_text: String,
    pub links: AlignmentLinks,
    pub warnings: Vec<ProjectionWarning>,
}

#[derive(Debug, Clone)]
pub struct DocumentTranslation {
    pub content: String,
    pub source_segments: Vec<Segment>,
    pub translated: Vec<TranslatedSegment>,
    pub term_findings: Vec<TermFinding>,
    pub backend_id: String,
}

impl DocumentTranslation {
    pub fn reports(&self) -> Vec<SegmentReport> {
        self.source_segments
            .iter()
            .zip(&self.translated)
            .map(|(s, t)| SegmentReport {
                segment_id: s.segment_id.clone(),
                source_text: s.text.clone(),
                target_text: t.text.clone(),
                links: t.links.clone(),
                warnings: t.warnings.clone(),
            })
            .collect()
    }

    pub fn warnings(&self) -> impl Iterator<Item = &ProjectionWarning> {
        self.translated.iter().flat_map(|t| &t.warnings)
    }
}

/// Lexicons used when the backend gives no alignment. With a reverse
/// table the two directions are intersected.
#[derive(Debug, Clone, Default)]
pub struct AlignmentModel {
    pub forward: Option<LexiconTable>,
    pub reverse: Option<LexiconTable>,
}

pub struct Pipeline {
    backend: Arc<dyn Backend>,
    policy: ExtractionPolicy,
    alignment: AlignmentModel,
    glossary: Option<Glossary>,
}

pub const TEXT_ROOT: &str = "text";

pub fn parse_input(content: &str, format: InputFormat) -> Result<MarkupDocument, DocError> {
    let doc = match format {
        InputFormat::Html => parse_document(content.as_bytes(), DocFormat::Html)?,
        InputFormat::Xml => parse_document(content.as_bytes(), DocFormat::Xml)?,
        InputFormat::Text => MarkupDocument::new(Element::new(TEXT_ROOT).with_text(content), DocFormat::Xml),
    };
    Ok(canonicalize(&doc))
}

pub fn render_output(doc: &MarkupDocument, format: InputFormat) -> String {
    match format {
        InputFormat::Text => doc.root.text_content(),
        _ => serialize_to_string(doc),
    }
}

impl Pipeline {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Self {
            backend,
            policy: ExtractionPolicy::default(),
            alignment: AlignmentModel::default(),
            glossary: None,
        }
    }

    pub fn with_policy(mut self, policy: ExtractionPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_alignment(mut self, alignment: AlignmentModel) -> Self {
        self.alignment = alignment;
        self
    }

    pub fn with_glossary(mut self, glossary: Glossary) -> Self {
        self.glossary = Some(glossary);
        self
    }

    pub fn backend(&self) -> &Arc<dyn Backend> {
        &self.backend
    }

    pub fn glossary(&self) -> Option<&Glossary> {
        self.glossary.as_ref()
    }

    pub async fn translate(&self, content: &str, options: &TranslateOptions) -> Result<DocumentTranslation, PipelineError> {
        let doc = parse_input(content, options.format)?;
        let segments = extract_segments(&doc, &self.policy)?;
        if segments.is_empty() {
            return Ok(DocumentTranslation {
                content: render_output(&doc, options.format),
                source_segments: segments,
                translated: Vec::new(),
                term_findings: Vec::new(),
                backend_id: self.backend.id().to_string(),
            });
        }

        let request = TranslationRequest {
            segments: segments.iter().map(|s| s.text.clone()).collect(),
            source_lang: options.source_lang.clone(),
            target_lang: options.target_lang.clone(),
            want_alignment: true,
        };
        let result = self.backend.translate_batch(&request).await?;
        if result.translations.len() != segments.len() {
            return Err(PipelineError::LengthMismatch {
                expected: segments.len(),
                got: result.translations.len(),
            });
        }

        let mut translated = Vec::with_capacity(segments.len());
        for (k, (src, tgt)) in segments.iter().zip(&result.translations).enumerate() {
            let given = result.alignments.as_ref().and_then(|a| a.get(k));
            translated.push(self.project(src, tgt, given));
        }

        let out = reinsert_segments(&doc, &self.policy, &translated)?;
        let term_findings = match (&self.glossary, options.check_terms) {
            (Some(g), true) => segments
                .iter()
                .zip(&translated)
                .flat_map(|(s, t)| check_terminology(s, &t.text, g, options.domain.as_deref().unwrap_or("")))
                .collect(),
            _ => Vec::new(),
        };
        Ok(DocumentTranslation {
            content: render_output(&out, options.format),
            source_segments: segments,
            translated,
            term_findings,
            backend_id: result.backend_id,
        })
    }

    /// Aligns and projects one segment. `given` is a backend alignment
    /// over the plain tokenization of both sides.
    pub fn project(&self, src: &Segment, tgt_text: &str, given: Option<&AlignmentLinks>) -> TranslatedSegment {
        let coarse_src = tokenize(&src.text);
        let coarse_tgt = tokenize(tgt_text);
        let links = match given {
            Some(a) if a.src_len == coarse_src.len() && a.tgt_len == coarse_tgt.len() && a.in_bounds() => a.clone(),
            _ => self.lexicon_links(&coarse_src, &coarse_tgt),
        };
        let links = link_copies(&coarse_src, &coarse_tgt, links);
        let (tokens, links) = refine(src, &coarse_src, tgt_text, &coarse_tgt, &links);
        project_segment(src, tgt_text, tokens, links)
    }

    fn lexicon_links(&self, src: &[Token], tgt: &[Token]) -> AlignmentLinks {
        let texts = |t: &[Token]| t.iter().map(|t| t.text.clone()).collect::<Vec<_>>();
        let (s, t) = (texts(src), texts(tgt));
        match (&self.alignment.forward, &self.alignment.reverse) {
            (Some(fwd), Some(rev)) => {
                let forward = viterbi_align(&s, &t, fwd);
                let reverse = viterbi_align(&t, &s, rev);
                symmetrize(&forward, &reverse, Symmetrization::Intersection).unwrap_or(forward)
            }
            (Some(fwd), None) => viterbi_align(&s, &t, fwd),
            _ => AlignmentLinks::new(src.len(), tgt.len()),
        }
    }
}

/// Target tokens without a real link that repeat an unlinked source token
/// verbatim (names, numbers, formulas) are linked to it.
fn link_copies(src: &[Token], tgt: &[Token], mut links: AlignmentLinks) -> AlignmentLinks {
    let mut src_linked: Vec<bool> = vec![false; src.len()];
    let mut tgt_linked: Vec<bool> = vec![false; tgt.len()];
    for (i, j) in links.real_links() {
        src_linked[i] = true;
        tgt_linked[j] = true;
    }
    for (j, t) in tgt.iter().enumerate() {
        if tgt_linked[j] {
            continue;
        }
        if let Some(i) = (0..src.len()).find(|&i| !src_linked[i] && src[i].text == t.text) {
            links.links.remove(&Link::null(j));
            links.insert(Link::new(i, j));
            src_linked[i] = true;
        }
    }
    links
}

/// Maps an alignment over plain tokens onto the segment's tokens, which
/// may be split further at formatting boundaries. A target token that
/// copies a split source token is split the same way, piece by piece.
fn refine(
    src: &Segment,
    coarse_src: &[Token],
    tgt_text: &str,
    coarse_tgt: &[Token],
    links: &AlignmentLinks,
) -> (Vec<Token>, AlignmentLinks) {
    // refined source pieces of every coarse source token
    let pieces: Vec<Vec<usize>> = coarse_src
        .iter()
        .map(|c| {
            src.tokens
                .iter()
                .enumerate()
                .filter(|(_, t)| t.start >= c.start && t.end <= c.end)
                .map(|(r, _)| r)
                .collect()
        })
        .collect();

    let mut tokens = Vec::with_capacity(coarse_tgt.len());
    let mut new_index: Vec<Vec<usize>> = Vec::with_capacity(coarse_tgt.len());
    let mut pairwise: Vec<Option<usize>> = vec![None; coarse_tgt.len()];
    for (j, t) in coarse_tgt.iter().enumerate() {
        let copied = links
            .real_links()
            .find(|&(i, jj)| jj == j && pieces[i].len() > 1 && coarse_src[i].text == t.text)
            .map(|(i, _)| i);
        let mut indices = Vec::new();
        match copied {
            Some(i) => {
                for &r in &pieces[i] {
                    let piece = &src.tokens[r];
                    let from = t.start + (piece.start - coarse_src[i].start);
                    let to = t.start + (piece.end - coarse_src[i].start);
                    indices.push(tokens.len());
                    tokens.push(Token::new(&tgt_text[from..to], from, to));
                }
                pairwise[j] = Some(i);
            }
            None => {
                indices.push(tokens.len());
                tokens.push(t.clone());
            }
        }
        new_index.push(indices);
    }

    let mut out = AlignmentLinks::new(src.tokens.len(), tokens.len());
    for link in &links.links {
        let j = link.tgt;
        match link.src {
            None => new_index[j].iter().for_each(|&n| out.insert(Link::null(n))),
            Some(i) if pairwise[j] == Some(i) => {
                for (&r, &n) in pieces[i].iter().zip(&new_index[j]) {
                    out.insert(Link::new(r, n));
                }
            }
            Some(i) => {
                for &r in &pieces[i] {
                    for &n in &new_index[j] {
                        out.insert(Link::new(r, n));
                    }
                }
            }
        }
    }
    (tokens, out)
}

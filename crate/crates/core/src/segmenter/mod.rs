//! Segment extraction, reinsertion and exercise classification.
//!
//! A document is walked in order. Consecutive text and inline-element
//! children of a block form a *run*; the run is flattened into plain text
//! with one span record per inline element, split into sentences, and each
//! sentence becomes a [`Segment`]. Translatable attribute values (`alt`,
//! `title` by default) become segments of their own. Reinsertion rebuilds
//! each run from translated text plus the projected spans.

mod classify;
mod layout;
mod policy;
mod reinsert;
mod sentences;
mod tokenize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::docmodel::{MarkupDocument, NodePath, TagSnapshot};

pub use classify::{classify_exercise, ExclusionReason, ExerciseClass, ExerciseMeta};
pub use policy::{ExtractionPolicy, PolicyError};
pub use reinsert::reinsert_segments;
pub use sentences::{split_sentences, Abbreviations};
pub use tokenize::{is_punctuation, split_at_boundaries, tokenize, Token};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SegmentError {
    #[error("inline element <{element}> at {path} contains block-level content")]
    NestingUnsupported { path: NodePath, element: String },
    #[error("segment {segment_id} no longer resolves in the document")]
    LocationStale { segment_id: String },
    #[error("segment {segment_id}: {message}")]
    SpanConflict { segment_id: String, message: String },
}

/// An inline element flattened onto a token range of a segment.
///
/// `ws_before`/`ws_after` record how many bytes of whitespace next to the
/// covered tokens the element also enclosed, so that reinsertion can put the
/// tag boundary back on the same side of a space. For an empty token range
/// both count backwards from the anchor token's start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InlineSpan {
    pub marker_id: String,
    pub tag: TagSnapshot,
    pub start: usize,
    pub end: usize,
    #[serde(default)]
    pub ws_before: usize,
    #[serde(default)]
    pub ws_after: usize,
}

impl InlineSpan {
    pub fn new(marker_id: impl Into<String>, tag: TagSnapshot, start: usize, end: usize) -> Self {
        Self {
            marker_id: marker_id.into(),
            tag,
            start,
            end,
            ws_before: 0,
            ws_after: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn with_range(&self, start: usize, end: usize) -> Self {
        Self {
            start,
            end,
            ..self.clone()
        }
    }
}

/// Where a segment came from: the first node of a text run, or an
/// attribute of an element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SegmentLocation {
    pub path: NodePath,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub segment_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub spans: Vec<InlineSpan>,
    pub location: SegmentLocation,
    pub sentence_index: usize,
}

impl Segment {
    pub fn token_texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }
}

/// Extracts translatable segments in document order.
pub fn extract_segments(
    doc: &MarkupDocument,
    policy: &ExtractionPolicy,
) -> Result<Vec<Segment>, SegmentError> {
    Ok(layout::Layout::build(doc, policy)?.into_segments())
}

/// True when no two spans partially overlap (containment and disjointness
/// are both fine).
pub fn spans_properly_nested(spans: &[InlineSpan]) -> bool {
    spans.iter().enumerate().all(|(i, a)| {
        spans[i + 1..]
            .iter()
            .all(|b| !partially_overlap((a.start, a.end), (b.start, b.end)))
    })
}

pub(crate) fn partially_overlap(a: (usize, usize), b: (usize, usize)) -> bool {
    (a.0 < b.0 && b.0 < a.1 && a.1 < b.1) || (b.0 < a.0 && a.0 < b.1 && b.1 < a.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docmodel::{canonicalize, parse_str, serialize_to_string, DocFormat};
    use crate::tagproject::TranslatedSegment;

    fn doc(s: &str) -> MarkupDocument {
        canonicalize(&parse_str(s, DocFormat::Html).unwrap())
    }

    fn extract(s: &str) -> Vec<Segment> {
        extract_segments(&doc(s), &ExtractionPolicy::default()).unwrap()
    }

    #[test]
    fn single_span() {
        let segs = extract("<p>Hi <b>there</b></p>");
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].text, "Hi there");
        assert_eq!(segs[0].spans.len(), 1);
        let span = &segs[0].spans[0];
        assert_eq!((span.start, span.end), (1, 2));
        assert_eq!(span.tag.name, "b");
    }

    #[test]
    fn sentences_become_segments() {
        let segs = extract("<p>One. Two.</p>");
        assert_eq!(segs.iter().map(|s| s.text.as_str()).collect::<Vec<_>>(), ["One.", "Two."]);
        assert_eq!(segs[1].sentence_index, 1);
    }

    #[test]
    fn skip_tags_are_absent() {
        let segs = extract("<p><script>x</script>ok</p>");
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].text, "ok");
    }

    #[test]
    fn attributes_become_segments() {
        let segs = extract(r#"<div><img src="a.png" alt="Žlabatka na listu"/><p title="Nápověda">Text</p></div>"#);
        let texts: Vec<_> = segs.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, ["Žlabatka na listu", "Nápověda", "Text"]);
        assert_eq!(segs[0].location.attribute.as_deref(), Some("alt"));
        assert_eq!(segs[0].location.path, NodePath(vec![0]));
    }

    #[test]
    fn intra_word_formatting_splits_tokens() {
        let segs = extract("<p>Voda je H<sub>2</sub>O.</p>");
        assert_eq!(segs[0].token_texts(), ["Voda", "je", "H", "2", "O", "."]);
        assert_eq!((segs[0].spans[0].start, segs[0].spans[0].end), (3, 4));
    }

    #[test]
    fn inline_element_across_block_is_rejected() {
        let err = extract_segments(&doc("<p><b>a<div>b</div></b></p>"), &ExtractionPolicy::default())
            .unwrap_err();
        assert!(matches!(err, SegmentError::NestingUnsupported { .. }));
    }

    #[test]
    fn void_elements_stay_inside_the_sentence() {
        let segs = extract(r#"<p>Doplň <b>plicní <input placeholder="slovo"></b> žíly.</p>"#);
        let texts: Vec<_> = segs.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, ["slovo", "Doplň plicní  žíly."]);
        assert_eq!(segs[0].location.attribute.as_deref(), Some("placeholder"));
        assert_eq!(segs[1].spans.len(), 2);
    }

    #[test]
    fn empty_inline_elements_are_zero_width() {
        let segs = extract(r#"<p>Doplň <span class="blank"></span> slovo.</p>"#);
        let span = &segs[0].spans[0];
        assert!(span.is_empty());
        assert_eq!(span.start, 1);
    }

    #[test]
    fn identity_reinsert_round_trips() {
        for src in [
            "<p>Hi <b>there</b></p>",
            "<p><b>Hi </b>there</p>",
            "<div><p>One. <i>Two</i> three. Four.</p><p>  <b>Pět. Šest.</b>  </p></div>",
            "<p>Doplň <span class=\"blank\"></span> slovo a <b> </b>dál.</p>",
            "<p>Voda je H<sub>2</sub>O a <em><b>sůl</b></em>.</p>",
            "<p>a <b></b><i></i> b<b><i></i></b></p>",
            "<div><img alt=\"Obrázek. Druhá věta.\"/><p>x<br/>y</p><!-- c --></div>",
        ] {
            let d = doc(src);
            let policy = ExtractionPolicy::default();
            let segs = extract_segments(&d, &policy).unwrap();
            let translated: Vec<_> = segs.iter().map(TranslatedSegment::identity).collect();
            let out = reinsert_segments(&d, &policy, &translated).unwrap();
            assert_eq!(serialize_to_string(&out), serialize_to_string(&d), "{src}");
        }
    }

    #[test]
    fn reinsert_with_moved_span() {
        let d = doc("<p>Hi <b>there</b></p>");
        let policy = ExtractionPolicy::default();
        let segs = extract_segments(&d, &policy).unwrap();
        let mut t = TranslatedSegment::identity(&segs[0]);
        t.text = "X Y".into();
        t.tokens = tokenize("X Y");
        t.spans = vec![segs[0].spans[0].with_range(0, 1)];
        let out = reinsert_segments(&d, &policy, &[t]).unwrap();
        assert_eq!(serialize_to_string(&out), "<p><b>X</b> Y</p>");
    }

    #[test]
    fn empty_translation_list_leaves_document_unchanged() {
        let d = doc("<div><p>Hi <b>there</b></p></div>");
        let out = reinsert_segments(&d, &ExtractionPolicy::default(), &[]).unwrap();
        assert_eq!(out, d);
    }

    #[test]
    fn unknown_segment_is_stale() {
        let d = doc("<p>Hi</p>");
        let segs = extract_segments(&d, &ExtractionPolicy::default()).unwrap();
        let mut t = TranslatedSegment::identity(&segs[0]);
        t.segment_id = "99.0".into();
        let err = reinsert_segments(&d, &ExtractionPolicy::default(), &[t]).unwrap_err();
        assert!(matches!(err, SegmentError::LocationStale { .. }));
    }

    #[test]
    fn partially_overlapping_translated_spans_conflict() {
        let d = doc("<p><b>a b</b> <i>c</i></p>");
        let policy = ExtractionPolicy::default();
        let segs = extract_segments(&d, &policy).unwrap();
        let mut t = TranslatedSegment::identity(&segs[0]);
        t.spans[0] = t.spans[0].with_range(0, 2);
        t.spans[1] = t.spans[1].with_range(1, 3);
        let err = reinsert_segments(&d, &policy, &[t]).unwrap_err();
        assert!(matches!(err, SegmentError::SpanConflict { .. }));
    }
}

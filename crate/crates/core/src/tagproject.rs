//! Moving inline spans from a source segment onto its translation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aligner::AlignmentLinks;
use crate::segmenter::{partially_overlap, InlineSpan, Segment, Token};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TagProjectError {
    #[error("source index {index} out of bounds for {len} tokens")]
    IndexOutOfBounds { index: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    UnalignedFallback,
    SpanFragmented,
    SpanDropped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionWarning {
    #[serde(default)]
    pub segment_id: String,
    pub marker_id: String,
    pub kind: WarningKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslatedSegment {
    pub segment_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub spans: Vec<InlineSpan>,
    pub links: AlignmentLinks,
    #[serde(default)]
    pub warnings: Vec<ProjectionWarning>,
}

impl TranslatedSegment {
    /// The segment as its own translation, aligned on the diagonal.
    pub fn identity(src: &Segment) -> Self {
        Self {
            segment_id: src.segment_id.clone(),
            text: src.text.clone(),
            tokens: src.tokens.clone(),
            spans: src.spans.clone(),
            links: AlignmentLinks::diagonal(src.tokens.len()),
            warnings: Vec::new(),
        }
    }

    pub fn token_texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }
}

/// Projects every span, repairs nesting and packages the result.
pub fn project_segment(
    src: &Segment,
    text: impl Into<String>,
    tokens: Vec<Token>,
    links: AlignmentLinks,
) -> TranslatedSegment {
    let (spans, mut warnings) = project_spans(src, &tokens, &links);
    for w in &mut warnings {
        w.segment_id = src.segment_id.clone();
    }
    TranslatedSegment {
        segment_id: src.segment_id.clone(),
        text: text.into(),
        tokens,
        spans,
        links,
        warnings,
    }
}

fn proportional(pos: usize, src_len: usize, tgt_len: usize) -> usize {
    if src_len == 0 {
        return 0;
    }
    let p = (tgt_len as f64 * pos as f64 / src_len as f64).round() as usize;
    p.min(tgt_len)
}

/// Each span becomes the smallest contiguous target range covering the
/// tokens aligned to it. Spans with nothing aligned become zero-width at
/// the proportional position. Empty source spans follow the token they
/// precede, or the one they follow.
pub fn project_spans(
    src: &Segment,
    tgt_tokens: &[Token],
    links: &AlignmentLinks,
) -> (Vec<InlineSpan>, Vec<ProjectionWarning>) {
    let n_src = src.tokens.len();
    let n_tgt = tgt_tokens.len();
    let warn = |span: &InlineSpan, kind| ProjectionWarning {
        segment_id: src.segment_id.clone(),
        marker_id: span.marker_id.clone(),
        kind,
    };
    let targets = |i: usize| -> Vec<usize> {
        links.targets_of(i).into_iter().filter(|&j| j < n_tgt).collect()
    };

    let mut out = Vec::with_capacity(src.spans.len());
    let mut warnings = Vec::new();
    for span in &src.spans {
        if span.start > span.end || span.end > n_src {
            warnings.push(warn(span, WarningKind::SpanDropped));
            continue;
        }
        if span.is_empty() {
            let a = span.start;
            let next = if a < n_src { targets(a).first().copied() } else { None };
            let prev = if a > 0 { targets(a - 1).last().map(|j| j + 1) } else { None };
            let pos = next.or(prev).unwrap_or_else(|| proportional(a, n_src, n_tgt));
            out.push(span.with_range(pos, pos));
            continue;
        }
        let covered: BTreeSet<usize> = (span.start..span.end).flat_map(targets).collect();
        match (covered.first(), covered.last()) {
            (Some(&lo), Some(&hi)) => {
                if hi - lo + 1 != covered.len() {
                    warnings.push(warn(span, WarningKind::SpanFragmented));
                }
                out.push(span.with_range(lo, hi + 1));
            }
            _ => {
                let pos = proportional(span.start, n_src, n_tgt);
                warnings.push(warn(span, WarningKind::UnalignedFallback));
                out.push(span.with_range(pos, pos));
            }
        }
    }
    (repair_nesting(out), warnings)
}

/// Splits spans until none partially overlaps another. Of two conflicting
/// spans the shorter one (the later one on ties) is cut at the other's
/// boundary; the pieces keep the marker id.
pub fn repair_nesting(spans: Vec<InlineSpan>) -> Vec<InlineSpan> {
    split_partial_overlaps(spans, |s| (s.start, s.end), |s, a, b| s.with_range(a, b))
}

/// Generic overlap repair over half-open ranges, keeping input order with
/// fragments in place of the split item.
pub(crate) fn split_partial_overlaps<T>(
    mut items: Vec<T>,
    range: impl Fn(&T) -> (usize, usize),
    with_range: impl Fn(&T, usize, usize) -> T,
) -> Vec<T> {
    loop {
        let conflict = (0..items.len()).find_map(|i| {
            (i + 1..items.len())
                .find(|&j| partially_overlap(range(&items[i]), range(&items[j])))
                .map(|j| (i, j))
        });
        let Some((i, j)) = conflict else {
            return items;
        };
        let (a, b) = (range(&items[i]), range(&items[j]));
        let (victim, other) = if a.1 - a.0 < b.1 - b.0 { (i, b) } else { (j, a) };
        let (v0, v1) = range(&items[victim]);
        let cut = if v0 < other.0 && other.0 < v1 { other.0 } else { other.1 };
        let left = with_range(&items[victim], v0, cut);
        let right = with_range(&items[victim], cut, v1);
        items[victim] = left;
        items.insert(victim + 1, right);
    }
}

/// Target token texts linked to source token `src_index`, in target order.
pub fn word_translation(
    src_index: usize,
    links: &AlignmentLinks,
    tgt_tokens: &[Token],
) -> Result<Vec<String>, TagProjectError> {
    if src_index >= links.src_len {
        return Err(TagProjectError::IndexOutOfBounds {
            index: src_index,
            len: links.src_len,
        });
    }
    Ok(links
        .targets_of(src_index)
        .into_iter()
        .filter_map(|j| tgt_tokens.get(j).map(|t| t.text.clone()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docmodel::{NodePath, TagSnapshot};
    use crate::segmenter::{tokenize, SegmentLocation};

    fn tag(name: &str) -> TagSnapshot {
        TagSnapshot {
            name: name.into(),
            attributes: Vec::new(),
        }
    }

    fn segment(text: &str, spans: &[(usize, usize)]) -> Segment {
        Segment {
            segment_id: "0.0".into(),
            text: text.into(),
            tokens: tokenize(text),
            spans: spans
                .iter()
                .enumerate()
                .map(|(k, &(a, b))| InlineSpan::new(format!("m{k}"), tag("b"), a, b))
                .collect(),
            location: SegmentLocation {
                path: NodePath::root(),
                attribute: None,
            },
            sentence_index: 0,
        }
    }

    fn ranges(spans: &[InlineSpan]) -> Vec<(usize, usize)> {
        spans.iter().map(|s| (s.start, s.end)).collect()
    }

    #[test]
    fn identity_projection() {
        let src = segment("a b c", &[(1, 2)]);
        let (spans, warnings) = project_spans(&src, &src.tokens, &AlignmentLinks::diagonal(3));
        assert_eq!(ranges(&spans), [(1, 2)]);
        assert!(warnings.is_empty());
    }

    #[test]
    fn permuted_projection() {
        let src = segment("a b c", &[(1, 2)]);
        let links = AlignmentLinks::from_pairs(3, 3, &[(0, 2), (1, 0), (2, 1)]);
        let (spans, _) = project_spans(&src, &tokenize("x y z"), &links);
        assert_eq!(ranges(&spans), [(0, 1)]);
    }

    #[test]
    fn unaligned_falls_back_proportionally() {
        let src = segment("a b", &[(0, 1)]);
        let links = AlignmentLinks::from_pairs(2, 4, &[(1, 3)]);
        let (spans, warnings) = project_spans(&src, &tokenize("w x y z"), &links);
        assert_eq!(ranges(&spans), [(0, 0)]);
        assert_eq!(warnings[0].kind, WarningKind::UnalignedFallback);
        assert_eq!(warnings[0].marker_id, "m0");
    }

    #[test]
    fn gapped_targets_are_covered_and_flagged() {
        let src = segment("a b c", &[(0, 1)]);
        let links = AlignmentLinks::from_pairs(3, 3, &[(0, 0), (0, 2), (1, 1)]);
        let (spans, warnings) = project_spans(&src, &tokenize("x y z"), &links);
        assert_eq!(ranges(&spans), [(0, 3)]);
        assert_eq!(warnings[0].kind, WarningKind::SpanFragmented);
    }

    #[test]
    fn empty_span_follows_its_token() {
        let src = segment("a b", &[(1, 1), (2, 2)]);
        let links = AlignmentLinks::from_pairs(2, 2, &[(0, 1), (1, 0)]);
        let (spans, warnings) = project_spans(&src, &tokenize("y x"), &links);
        assert_eq!(ranges(&spans), [(0, 0), (1, 1)]);
        assert!(warnings.is_empty());
    }

    #[test]
    fn repair_splits_the_shorter_span() {
        let spans = vec![
            InlineSpan::new("A", tag("b"), 0, 3),
            InlineSpan::new("B", tag("i"), 2, 5),
        ];
        let out = repair_nesting(spans);
        assert_eq!(ranges(&out), [(0, 3), (2, 3), (3, 5)]);
        assert_eq!(out[1].marker_id, "B");
        assert_eq!(out[2].marker_id, "B");
    }

    #[test]
    fn repair_ties_split_the_later_span() {
        let out = repair_nesting(vec![
            InlineSpan::new("A", tag("b"), 0, 2),
            InlineSpan::new("B", tag("i"), 1, 3),
        ]);
        assert_eq!(ranges(&out), [(0, 2), (1, 2), (2, 3)]);
    }

    #[test]
    fn repair_leaves_nested_and_equal_spans() {
        let spans = vec![
            InlineSpan::new("A", tag("b"), 0, 3),
            InlineSpan::new("B", tag("i"), 1, 2),
            InlineSpan::new("C", tag("u"), 0, 3),
        ];
        assert_eq!(repair_nesting(spans.clone()), spans);
    }

    #[test]
    fn word_translation_lookups() {
        let tgt = tokenize("x y z");
        let diag = AlignmentLinks::diagonal(3);
        assert_eq!(word_translation(1, &diag, &tgt).unwrap(), ["y"]);
        let two = AlignmentLinks::from_pairs(2, 3, &[(0, 2), (0, 0)]);
        assert_eq!(word_translation(0, &two, &tgt).unwrap(), ["x", "z"]);
        assert!(word_translation(1, &two, &tgt).unwrap().is_empty());
        assert_eq!(
            word_translation(5, &two, &tgt),
            Err(TagProjectError::IndexOutOfBounds { index: 5, len: 2 })
        );
    }
}

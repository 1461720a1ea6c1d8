use std::ops::Range;

use crate::docmodel::{Element, MarkupDocument, MarkupNode, NodePath, TagSnapshot};

use super::policy::ExtractionPolicy;
use super::sentences::split_sentences;
use super::tokenize::{split_at_boundaries, tokenize, Token};
use super::{InlineSpan, Segment, SegmentError, SegmentLocation};

/// One inline element of a run, with its byte range in the run text.
#[derive(Debug, Clone)]
pub(crate) struct RunElement {
    pub marker: String,
    pub path: NodePath,
    pub tag: TagSnapshot,
    pub range: Range<usize>,
    pub parent: Option<usize>,
    pub depth: usize,
}

impl RunElement {
    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Run {
    pub parent: NodePath,
    pub children: Range<usize>,
    pub text: String,
    pub elements: Vec<RunElement>,
    pub sentences: Vec<Range<usize>>,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone)]
pub(crate) struct AttributeUnit {
    pub element: NodePath,
    pub attribute: String,
    pub value: String,
    pub sentences: Vec<Range<usize>>,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone)]
pub(crate) enum Unit {
    Run(Run),
    Attribute(AttributeUnit),
}

impl Unit {
    pub fn segments(&self) -> &[Segment] {
        match self {
            Unit::Run(r) => &r.segments,
            Unit::Attribute(a) => &a.segments,
        }
    }
}

/// Extraction result with everything reinsertion needs to rebuild runs.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub units: Vec<Unit>,
}

struct Builder<'p> {
    policy: &'p ExtractionPolicy,
    units: Vec<Unit>,
    markers: usize,
}

impl Layout {
    pub fn build(doc: &MarkupDocument, policy: &ExtractionPolicy) -> Result<Self, SegmentError> {
        let mut builder = Builder {
            policy,
            units: Vec::new(),
            markers: 0,
        };
        builder.walk(&doc.root, NodePath::root())?;
        Ok(Layout {
            units: builder.units,
        })
    }

    pub fn into_segments(self) -> Vec<Segment> {
        self.units
            .into_iter()
            .flat_map(|u| match u {
                Unit::Run(r) => r.segments,
                Unit::Attribute(a) => a.segments,
            })
            .collect()
    }
}

impl Builder<'_> {
    fn is_run_member(&self, node: &MarkupNode) -> bool {
        match node {
            MarkupNode::Text(_) => true,
            MarkupNode::Element(e) => self.policy.is_inline(&e.name),
            _ => false,
        }
    }

    fn walk(&mut self, el: &Element, path: NodePath) -> Result<(), SegmentError> {
        self.attributes(el, &path);
        let children = &el.children;
        let mut i = 0;
        while i < children.len() {
            if self.is_run_member(&children[i]) {
                let mut j = i;
                while j < children.len() && self.is_run_member(&children[j]) {
                    j += 1;
                }
                self.run(&children[i..j], &path, i..j)?;
                i = j;
                continue;
            }
            if let MarkupNode::Element(child) = &children[i] {
                if !self.policy.is_skipped(&child.name) {
                    self.walk(child, path.child(i))?;
                }
            }
            i += 1;
        }
        Ok(())
    }

    fn attributes(&mut self, el: &Element, path: &NodePath) {
        for attr in &el.attributes {
            if !self
                .policy
                .translatable_attributes
                .iter()
                .any(|a| a == &attr.name)
            {
                continue;
            }
            let sentences = split_sentences(&attr.value, &self.policy.abbreviations);
            if sentences.is_empty() {
                continue;
            }
            let unit = self.units.len();
            let segments = sentences
                .iter()
                .enumerate()
                .map(|(k, range)| {
                    let text = attr.value[range.clone()].to_string();
                    Segment {
                        segment_id: format!("{unit}.{k}"),
                        tokens: tokenize(&text),
                        text,
                        spans: Vec::new(),
                        location: SegmentLocation {
                            path: path.clone(),
                            attribute: Some(attr.name.clone()),
                        },
                        sentence_index: k,
                    }
                })
                .collect();
            self.units.push(Unit::Attribute(AttributeUnit {
                element: path.clone(),
                attribute: attr.name.clone(),
                value: attr.value.clone(),
                sentences,
                segments,
            }));
        }
    }

    fn run(
        &mut self,
        nodes: &[MarkupNode],
        parent: &NodePath,
        children: Range<usize>,
    ) -> Result<(), SegmentError> {
        let mut text = String::new();
        let mut elements = Vec::new();
        self.flatten(nodes, parent, children.start, &mut text, &mut elements, None, 0)?;
        let sentences = split_sentences(&text, &self.policy.abbreviations);
        if sentences.is_empty() {
            return Ok(());
        }
        let unit = self.units.len();
        let location = SegmentLocation {
            path: parent.child(children.start),
            attribute: None,
        };
        let assigned = assign_empty_elements(&elements, &sentences);
        let segments = sentences
            .iter()
            .enumerate()
            .map(|(k, range)| {
                build_segment(
                    format!("{unit}.{k}"),
                    &text,
                    range.clone(),
                    &elements,
                    &assigned,
                    k,
                    location.clone(),
                )
            })
            .collect();
        self.units.push(Unit::Run(Run {
            parent: parent.clone(),
            children,
            text,
            elements,
            sentences,
            segments,
        }));
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn flatten(
        &mut self,
        nodes: &[MarkupNode],
        path: &NodePath,
        first_index: usize,
        text: &mut String,
        elements: &mut Vec<RunElement>,
        parent: Option<usize>,
        depth: usize,
    ) -> Result<(), SegmentError> {
        for (offset, node) in nodes.iter().enumerate() {
            match node {
                MarkupNode::Text(t) => text.push_str(t),
                MarkupNode::Element(e) if self.policy.is_inline(&e.name) => {
                    let idx = elements.len();
                    let child_path = path.child(first_index + offset);
                    self.attributes(e, &child_path);
                    elements.push(RunElement {
                        marker: format!("m{}", self.markers),
                        path: child_path.clone(),
                        tag: e.snapshot(),
                        range: text.len()..text.len(),
                        parent,
                        depth,
                    });
                    self.markers += 1;
                    self.flatten(&e.children, &child_path, 0, text, elements, Some(idx), depth + 1)?;
                    elements[idx].range.end = text.len();
                }
                _ => {
                    // only reachable inside an inline element
                    let (element, at) = match parent {
                        Some(p) => (elements[p].tag.name.clone(), path.clone()),
                        None => (String::from("?"), path.child(first_index + offset)),
                    };
                    return Err(SegmentError::NestingUnsupported { path: at, element });
                }
            }
        }
        Ok(())
    }
}

/// Sentence index owning each empty element (the first sentence whose
/// closed range contains it), or `None` when it sits in a gap.
pub(crate) fn assign_empty_elements(elements: &[RunElement], sentences: &[Range<usize>]) -> Vec<Option<usize>> {
    elements
        .iter()
        .map(|e| {
            if !e.is_empty() {
                return None;
            }
            let p = e.range.start;
            sentences.iter().position(|s| s.start <= p && p <= s.end)
        })
        .collect()
}

fn build_segment(
    segment_id: String,
    run_text: &str,
    range: Range<usize>,
    elements: &[RunElement],
    assigned: &[Option<usize>],
    sentence_index: usize,
    location: SegmentLocation,
) -> Segment {
    let text = run_text[range.clone()].to_string();
    // element ranges clipped to this sentence, relative to its start
    let clipped: Vec<(usize, Range<usize>)> = elements
        .iter()
        .enumerate()
        .filter_map(|(i, e)| {
            if e.is_empty() {
                return (assigned[i] == Some(sentence_index))
                    .then(|| (i, e.range.start - range.start..e.range.start - range.start));
            }
            let from = e.range.start.max(range.start);
            let to = e.range.end.min(range.end);
            (from < to).then(|| (i, from - range.start..to - range.start))
        })
        .collect();

    let cuts: Vec<usize> = clipped.iter().flat_map(|(_, r)| [r.start, r.end]).collect();
    let tokens = split_at_boundaries(&text, tokenize(&text), &cuts);
    let spans = clipped
        .into_iter()
        .map(|(i, r)| span_for_range(&elements[i], &tokens, text.len(), r))
        .collect();
    Segment {
        segment_id,
        text,
        tokens,
        spans,
        location,
        sentence_index,
    }
}

fn span_for_range(el: &RunElement, tokens: &[Token], text_len: usize, r: Range<usize>) -> InlineSpan {
    let n = tokens.len();
    let first = tokens.iter().position(|t| t.start >= r.start).unwrap_or(n);
    let last = tokens.iter().rposition(|t| t.end <= r.end).map_or(0, |i| i + 1);
    let mut span = InlineSpan::new(el.marker.clone(), el.tag.clone(), first, first);
    if first < last {
        span.end = last;
        span.ws_before = tokens[first].start - r.start;
        span.ws_after = r.end - tokens[last - 1].end;
    } else {
        let anchor = tokens.get(first).map_or(text_len, |t| t.start);
        span.ws_before = anchor - r.start;
        span.ws_after = anchor - r.end;
    }
    span
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docmodel::{parse_str, DocFormat};

    #[test]
    fn run_elements_record_ranges_and_parents() {
        let doc = parse_str("<p>a <b>b <i>c</i></b> d</p>", DocFormat::Xml).unwrap();
        let layout = Layout::build(&doc, &ExtractionPolicy::default()).unwrap();
        let Unit::Run(run) = &layout.units[0] else {
            panic!()
        };
        assert_eq!(run.text, "a b c d");
        assert_eq!(run.elements[0].range, 2..5);
        assert_eq!(run.elements[1].range, 4..5);
        assert_eq!(run.elements[1].parent, Some(0));
        assert_eq!(run.children, 0..3);
    }

    #[test]
    fn whitespace_inside_a_segment_is_recorded() {
        let doc = parse_str("<p><b>Hi </b>there <i> </i>x</p>", DocFormat::Xml).unwrap();
        let segs = Layout::build(&doc, &ExtractionPolicy::default())
            .unwrap()
            .into_segments();
        let b = &segs[0].spans[0];
        assert_eq!((b.start, b.end, b.ws_before, b.ws_after), (0, 1, 0, 1));
        let i = &segs[0].spans[1];
        assert_eq!((i.start, i.end, i.ws_before, i.ws_after), (2, 2, 1, 0));
    }
}

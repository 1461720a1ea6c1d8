use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use crate::docmodel::{Element, MarkupDocument, MarkupNode};
use crate::tagproject::{split_partial_overlaps, TranslatedSegment};

use super::layout::{assign_empty_elements, Layout, Run, Unit};
use super::policy::ExtractionPolicy;
use super::{spans_properly_nested, SegmentError, Token};

/// Writes translated segments back into a copy of `doc`.
///
/// Units (runs or attribute values) without any translated segment are
/// left untouched. Inside a touched run, sentences without a translation
/// keep their source text and formatting; whitespace between sentences is
/// copied verbatim.
pub fn reinsert_segments(
    doc: &MarkupDocument,
    policy: &ExtractionPolicy,
    translated: &[TranslatedSegment],
) -> Result<MarkupDocument, SegmentError> {
    let layout = Layout::build(doc, policy)?;
    let mut index: HashMap<&str, (usize, usize)> = HashMap::new();
    for (u, unit) in layout.units.iter().enumerate() {
        for (k, seg) in unit.segments().iter().enumerate() {
            index.insert(seg.segment_id.as_str(), (u, k));
        }
    }

    let mut by_unit: BTreeMap<usize, Vec<Option<&TranslatedSegment>>> = BTreeMap::new();
    for t in translated {
        let Some(&(u, k)) = index.get(t.segment_id.as_str()) else {
            return Err(SegmentError::LocationStale {
                segment_id: t.segment_id.clone(),
            });
        };
        validate(t)?;
        let slots = by_unit
            .entry(u)
            .or_insert_with(|| vec![None; layout.units[u].segments().len()]);
        slots[k] = Some(t);
    }

    let owned = |u: usize, slots: &[Option<&TranslatedSegment>]| -> Vec<TranslatedSegment> {
        slots
            .iter()
            .zip(layout.units[u].segments())
            .map(|(t, src)| t.cloned().unwrap_or_else(|| TranslatedSegment::identity(src)))
            .collect()
    };

    // Attribute values first, while every path still points into the
    // original structure. This includes attributes of inline elements.
    let mut out = doc.clone();
    for (&u, slots) in &by_unit {
        if let Unit::Attribute(attr) = &layout.units[u] {
            let owned = owned(u, slots);
            let gaps = gaps(&attr.value, &attr.sentences);
            let value = interleave(&attr.value, &gaps, &owned).0;
            let el = out.element_at_mut(&attr.element).ok_or_else(|| stale(&owned[0]))?;
            if let Some(a) = el.attributes.iter_mut().find(|a| a.name == attr.attribute) {
                a.value = value;
            }
        }
    }

    // Runs are rebuilt from snapshots, so pick up the patched attributes.
    let mut runs: BTreeMap<usize, Run> = BTreeMap::new();
    for &u in by_unit.keys() {
        if let Unit::Run(run) = &layout.units[u] {
            let mut run = run.clone();
            for el in &mut run.elements {
                if let Some(current) = out.element_at(&el.path) {
                    el.tag.attributes = current.attributes.clone();
                }
            }
            runs.insert(u, run);
        }
    }

    for (u, run) in runs.iter().rev() {
        let owned = owned(*u, &by_unit[u]);
        let nodes = rebuild_run(run, &owned)?;
        let parent = out.element_at_mut(&run.parent).ok_or_else(|| stale(&owned[0]))?;
        if run.children.end > parent.children.len() {
            return Err(stale(&owned[0]));
        }
        parent.children.splice(run.children.clone(), nodes);
    }
    Ok(out)
}

fn stale(t: &TranslatedSegment) -> SegmentError {
    SegmentError::LocationStale {
        segment_id: t.segment_id.clone(),
    }
}

fn conflict(t: &TranslatedSegment, message: impl Into<String>) -> SegmentError {
    SegmentError::SpanConflict {
        segment_id: t.segment_id.clone(),
        message: message.into(),
    }
}

fn validate(t: &TranslatedSegment) -> Result<(), SegmentError> {
    let mut prev_end = 0;
    for tok in &t.tokens {
        if tok.start < prev_end
            || tok.start >= tok.end
            || tok.end > t.text.len()
            || !t.text.is_char_boundary(tok.start)
            || !t.text.is_char_boundary(tok.end)
        {
            return Err(conflict(t, "token offsets do not fit the text"));
        }
        prev_end = tok.end;
    }
    if let Some(s) = t.spans.iter().find(|s| s.start > s.end || s.end > t.tokens.len()) {
        return Err(conflict(t, format!("span {} outside the token range", s.marker_id)));
    }
    if !spans_properly_nested(&t.spans) {
        return Err(conflict(t, "spans partially overlap"));
    }
    Ok(())
}

/// Whitespace stretches around `sentences`: one before each sentence and
/// one after the last.
fn gaps(text: &str, sentences: &[Range<usize>]) -> Vec<Range<usize>> {
    let mut out = Vec::with_capacity(sentences.len() + 1);
    let mut from = 0;
    for s in sentences {
        out.push(from..s.start);
        from = s.end;
    }
    out.push(from..text.len());
    out
}

/// Target text made of source gaps and translated sentences, plus the
/// offset of every target gap and sentence.
fn interleave(
    source: &str,
    gaps: &[Range<usize>],
    segments: &[TranslatedSegment],
) -> (String, Vec<usize>, Vec<usize>) {
    let mut text = String::new();
    let mut gap_at = Vec::with_capacity(gaps.len());
    let mut seg_at = Vec::with_capacity(segments.len());
    for (k, gap) in gaps.iter().enumerate() {
        gap_at.push(text.len());
        text.push_str(&source[gap.clone()]);
        if let Some(seg) = segments.get(k) {
            seg_at.push(text.len());
            text.push_str(&seg.text);
        }
    }
    (text, gap_at, seg_at)
}

/// An element occurrence in target text coordinates.
#[derive(Debug, Clone)]
struct Item {
    element: usize,
    start: usize,
    end: usize,
}

fn gap_before(tokens: &[Token], t: usize) -> usize {
    tokens[t].start - if t == 0 { 0 } else { tokens[t - 1].end }
}

/// Byte range of a span inside its segment text.
fn span_bytes(seg: &TranslatedSegment, start: usize, end: usize, ws_before: usize, ws_after: usize) -> (usize, usize) {
    let toks = &seg.tokens;
    if start < end {
        let last = end - 1;
        let after = toks.get(end).map_or(seg.text.len(), |t| t.start) - toks[last].end;
        (
            toks[start].start - ws_before.min(gap_before(toks, start)),
            toks[last].end + ws_after.min(after),
        )
    } else {
        let (anchor, room) = match toks.get(start) {
            Some(_) => (toks[start].start, gap_before(toks, start)),
            None => {
                let prev = toks.last().map_or(0, |t| t.end);
                (seg.text.len(), seg.text.len() - prev)
            }
        };
        let from = anchor - ws_before.min(room);
        let to = (anchor - ws_after.min(room)).max(from);
        (from, to)
    }
}

fn rebuild_run(run: &Run, segments: &[TranslatedSegment]) -> Result<Vec<MarkupNode>, SegmentError> {
    let gaps = gaps(&run.text, &run.sentences);
    let (text, gap_at, seg_at) = interleave(&run.text, &gaps, segments);
    let by_marker: HashMap<&str, usize> = run
        .elements
        .iter()
        .enumerate()
        .map(|(i, e)| (e.marker.as_str(), i))
        .collect();

    let mut items = Vec::new();
    for (k, seg) in segments.iter().enumerate() {
        let sentence = &run.sentences[k];
        for span in &seg.spans {
            let &e = by_marker
                .get(span.marker_id.as_str())
                .ok_or_else(|| conflict(seg, format!("unknown marker {}", span.marker_id)))?;
            let el = &run.elements[e];
            let (s, t) = span_bytes(seg, span.start, span.end, span.ws_before, span.ws_after);
            let mut start = seg_at[k] + s;
            let mut end = seg_at[k] + t;
            if s == 0 && el.range.start < sentence.start {
                let gap = &gaps[k];
                start = gap_at[k] + el.range.start.max(gap.start) - gap.start;
            }
            if t == seg.text.len() && el.range.end > sentence.end {
                let gap = &gaps[k + 1];
                end = gap_at[k + 1] + el.range.end.min(gap.end) - gap.start;
            }
            items.push(Item { element: e, start, end });
        }
    }

    // elements sitting entirely between sentences
    let assigned = assign_empty_elements(&run.elements, &run.sentences);
    for (e, el) in run.elements.iter().enumerate() {
        let in_sentence = if el.is_empty() {
            assigned[e].is_some()
        } else {
            run.sentences
                .iter()
                .any(|s| el.range.start < s.end && el.range.end > s.start)
        };
        if in_sentence {
            continue;
        }
        if let Some(k) = gaps
            .iter()
            .position(|g| g.start <= el.range.start && el.range.end <= g.end)
        {
            let base = gap_at[k] - gaps[k].start;
            items.push(Item {
                element: e,
                start: base + el.range.start,
                end: base + el.range.end,
            });
        }
    }

    let items = merge_fragments(items);
    let items = split_partial_overlaps(items, |i| (i.start, i.end), |i, a, b| Item {
        start: a,
        end: b,
        ..i.clone()
    });
    Ok(Tree::new(run, &text).build(items))
}

/// Joins touching or overlapping occurrences of the same element.
fn merge_fragments(mut items: Vec<Item>) -> Vec<Item> {
    items.sort_by_key(|i| (i.element, i.start, i.end));
    let mut out: Vec<Item> = Vec::with_capacity(items.len());
    for item in items {
        match out.last_mut() {
            Some(last) if last.element == item.element && item.start <= last.end => {
                last.end = last.end.max(item.end);
            }
            _ => out.push(item),
        }
    }
    out
}

struct Frame {
    item: Option<usize>,
    element: Option<usize>,
    end: usize,
    children: Vec<MarkupNode>,
}

/// Builds nodes from element occurrences over the target text.
///
/// Non-empty occurrences nest by range. Empty ones are placed by source
/// ancestry: inside the nearest open ancestor, before an element that
/// opens at the same position and comes later in the source.
struct Tree<'a> {
    run: &'a Run,
    text: &'a str,
    stack: Vec<Frame>,
    items: Vec<Item>,
    emitted: Vec<bool>,
}

fn push_node(children: &mut Vec<MarkupNode>, node: MarkupNode) {
    if let MarkupNode::Text(t) = &node {
        if t.is_empty() {
            return;
        }
        if let Some(MarkupNode::Text(prev)) = children.last_mut() {
            prev.push_str(t);
            return;
        }
    }
    children.push(node);
}

impl<'a> Tree<'a> {
    fn new(run: &'a Run, text: &'a str) -> Self {
        Self {
            run,
            text,
            stack: Vec::new(),
            items: Vec::new(),
            emitted: Vec::new(),
        }
    }

    fn build(mut self, items: Vec<Item>) -> Vec<MarkupNode> {
        self.emitted = vec![false; items.len()];
        self.items = items;
        self.stack.push(Frame {
            item: None,
            element: None,
            end: usize::MAX,
            children: Vec::new(),
        });

        let mut openers: Vec<usize> = (0..self.items.len())
            .filter(|&i| self.items[i].start < self.items[i].end)
            .collect();
        openers.sort_by_key(|&i| {
            let it = &self.items[i];
            let el = &self.run.elements[it.element];
            (it.start, std::cmp::Reverse(it.end), el.depth, it.element)
        });
        let mut empties: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, it) in self.items.iter().enumerate() {
            if it.start == it.end {
                empties.entry(it.start).or_default().push(i);
            }
        }
        for list in empties.values_mut() {
            list.sort_by_key(|&i| self.items[i].element);
        }

        let mut positions: Vec<usize> = self.items.iter().flat_map(|i| [i.start, i.end]).collect();
        positions.push(self.text.len());
        positions.sort_unstable();
        positions.dedup();

        let mut cursor = 0;
        let mut next_opener = 0;
        for p in positions {
            self.text_until(&mut cursor, p);
            let pending = empties.remove(&p).unwrap_or_default();

            while self.stack.len() > 1 && self.top().end == p {
                let host = self.top().element;
                for &z in &pending {
                    if self.eligible(z, &pending) && self.open_ancestor(z) == host {
                        self.emit_empty(z, &pending);
                    }
                }
                self.close();
            }

            while next_opener < openers.len() && self.items[openers[next_opener]].start == p {
                let o = openers[next_opener];
                let host = self.top().element;
                let before = self.items[o].element;
                for &z in &pending {
                    if self.eligible(z, &pending)
                        && self.open_ancestor(z) == host
                        && self.items[z].element < before
                    {
                        self.emit_empty(z, &pending);
                    }
                }
                self.open(o);
                next_opener += 1;
            }

            for &z in &pending {
                if self.eligible(z, &pending) {
                    self.emit_empty(z, &pending);
                }
            }
        }
        while self.stack.len() > 1 {
            self.close();
        }
        self.stack.pop().map(|f| f.children).unwrap_or_default()
    }

    fn top(&self) -> &Frame {
        self.stack.last().expect("root frame")
    }

    fn text_until(&mut self, cursor: &mut usize, p: usize) {
        if p > *cursor {
            let t = self.text[*cursor..p].to_string();
            push_node(&mut self.stack.last_mut().expect("root frame").children, MarkupNode::Text(t));
            *cursor = p;
        }
    }

    fn ancestors(&self, item: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.run.elements[self.items[item].element].parent, |&p| {
            self.run.elements[p].parent
        })
    }

    /// Nearest source ancestor currently open on the stack.
    fn open_ancestor(&self, item: usize) -> Option<usize> {
        self.ancestors(item)
            .find(|a| self.stack.iter().any(|f| f.element == Some(*a)))
    }

    /// Not yet emitted, and no source ancestor is itself waiting as an
    /// empty occurrence at this position.
    fn eligible(&self, item: usize, pending: &[usize]) -> bool {
        !self.emitted[item]
            && !self.ancestors(item).any(|a| {
                pending
                    .iter()
                    .any(|&z| !self.emitted[z] && self.items[z].element == a)
            })
    }

    fn open(&mut self, item: usize) {
        let it = &self.items[item];
        self.stack.push(Frame {
            item: Some(item),
            element: Some(it.element),
            end: it.end,
            children: Vec::new(),
        });
        self.emitted[item] = true;
    }

    fn close(&mut self) {
        let frame = self.stack.pop().expect("open frame");
        let item = frame.item.expect("not the root frame");
        let tag = self.run.elements[self.items[item].element].tag.clone();
        let el: Element = tag.into_element(frame.children);
        push_node(
            &mut self.stack.last_mut().expect("root frame").children,
            MarkupNode::Element(el),
        );
    }

    fn emit_empty(&mut self, item: usize, pending: &[usize]) {
        if self.emitted[item] {
            return;
        }
        let p = self.items[item].start;
        self.open(item);
        self.stack.last_mut().expect("frame").end = p;
        let me = Some(self.items[item].element);
        for &z in pending {
            if self.eligible(z, pending) && self.open_ancestor(z) == me {
                self.emit_empty(z, pending);
            }
        }
        self.close();
    }
}

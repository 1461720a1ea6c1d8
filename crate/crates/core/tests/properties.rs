use std::collections::{BTreeMap, BTreeSet};

use markmt_core::aligner::{symmetrize, train_model1_traced, AlignmentLinks, ParallelCorpus, Symmetrization};
use markmt_core::docmodel::{
    canonicalize, parse_str, serialize_to_string, Attribute, DocFormat, Element, MarkupDocument, MarkupNode,
};
use markmt_core::evalharness::{
    make_annotation_batch, parse_evalset, write_evalset, BatchOptions, EvalItem, Split, Subject, SystemRun,
};
use markmt_core::metrics::{chrf_sentence, ChrFParams};
use markmt_core::segmenter::{extract_segments, reinsert_segments, spans_properly_nested, tokenize, ExtractionPolicy, InlineSpan};
use markmt_core::tagproject::{project_segment, repair_nesting, TranslatedSegment};
use proptest::prelude::*;

fn text() -> impl Strategy<Value = String> {
    prop::string::string_regex("[a-zšřá &<>\"'.]{0,12}").unwrap()
}

fn leaf() -> BoxedStrategy<MarkupNode> {
    prop_oneof![
        3 => text().prop_map(MarkupNode::Text),
        1 => prop::string::string_regex("[a-z ]{0,8}").unwrap().prop_map(MarkupNode::Comment),
    ]
    .boxed()
}

fn attributes() -> impl Strategy<Value = Vec<Attribute>> {
    prop::collection::vec((prop::sample::select(vec!["class", "title", "id"]), text()), 0..2).prop_map(|attrs| {
        let mut seen = BTreeSet::new();
        attrs
            .into_iter()
            .filter(|(n, _)| seen.insert(*n))
            .map(|(n, v)| Attribute::new(n, v))
            .collect()
    })
}

fn build(names: Vec<&'static str>, child: BoxedStrategy<MarkupNode>) -> BoxedStrategy<Element> {
    (prop::sample::select(names), attributes(), prop::collection::vec(child, 0..4))
        .prop_map(|(name, attributes, children)| Element {
            name: name.into(),
            attributes,
            children,
        })
        .boxed()
}

/// Formatting elements holding only text and other formatting.
fn inline(depth: u32) -> BoxedStrategy<Element> {
    let child = if depth == 0 {
        leaf()
    } else {
        prop_oneof![2 => leaf(), 1 => inline(depth - 1).prop_map(MarkupNode::Element)].boxed()
    };
    build(vec!["b", "i", "span"], child)
}

/// Block elements. A `p` only holds inline content, as HTML parsing
/// closes an open paragraph at the next block.
fn element(depth: u32) -> BoxedStrategy<Element> {
    let para = build(vec!["p"], prop_oneof![2 => leaf(), 1 => inline(1).prop_map(MarkupNode::Element)].boxed());
    if depth == 0 {
        return para;
    }
    let child = prop_oneof![
        2 => leaf(),
        1 => inline(1).prop_map(MarkupNode::Element),
        1 => element(depth - 1).prop_map(MarkupNode::Element),
    ]
    .boxed();
    prop_oneof![1 => para, 2 => build(vec!["div", "section", "article", "td"], child)].boxed()
}

fn document() -> impl Strategy<Value = MarkupDocument> {
    (element(3), prop::bool::ANY).prop_map(|(root, xml)| {
        MarkupDocument::new(root, if xml { DocFormat::Xml } else { DocFormat::Html })
    })
}

fn span_list() -> impl Strategy<Value = Vec<InlineSpan>> {
    prop::collection::vec((0usize..10, 0usize..10), 0..6).prop_map(|ranges| {
        ranges
            .into_iter()
            .enumerate()
            .map(|(k, (a, b))| InlineSpan::new(format!("m{k}"), Element::new("b").snapshot(), a.min(b), a.max(b)))
            .collect()
    })
}

fn corpus() -> impl Strategy<Value = Vec<(Vec<String>, Vec<String>)>> {
    let side = |vocab: Vec<&'static str>| {
        prop::collection::vec(prop::sample::select(vocab), 1..5)
            .prop_map(|ws| ws.into_iter().map(String::from).collect::<Vec<_>>())
    };
    prop::collection::vec((side(vec!["a", "b", "c", "d"]), side(vec!["w", "x", "y", "z"])), 1..6)
}

fn items(n: usize, segments: usize) -> Vec<EvalItem> {
    (0..n)
        .map(|i| EvalItem {
            item_id: format!("i{i}"),
            subject: Subject::Biology,
            exercise_type: "fill_in".into(),
            source_segments: (0..segments).map(|s| format!("zdroj {i} {s}")).collect(),
            reference_segments: (0..segments).map(|s| format!("ціль {i} {s}")).collect(),
            split: Split::Test,
        })
        .collect()
}

proptest! {
    #[test]
    fn canonicalize_is_idempotent(doc in document()) {
        let once = canonicalize(&doc);
        prop_assert_eq!(&canonicalize(&once), &once);
    }

    #[test]
    fn canonical_documents_survive_serialization(doc in document()) {
        let canon = canonicalize(&doc);
        let text = serialize_to_string(&canon);
        let back = parse_str(&text, canon.format).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert_eq!(serialize_to_string(&canonicalize(&back)), text);
    }

    #[test]
    fn identity_reinsertion_reproduces_document(doc in document()) {
        let doc = canonicalize(&doc);
        let policy = ExtractionPolicy::default();
        // documents that put block content inside inline formatting are rejected
        if let Ok(segs) = extract_segments(&doc, &policy) {
            let identity: Vec<_> = segs.iter().map(TranslatedSegment::identity).collect();
            let out = reinsert_segments(&doc, &policy, &identity).unwrap();
            prop_assert_eq!(serialize_to_string(&out), serialize_to_string(&doc));
        }
    }

    #[test]
    fn repaired_spans_nest_and_cover_the_same_positions(spans in span_list()) {
        let repaired = repair_nesting(spans.clone());
        prop_assert!(spans_properly_nested(&repaired));
        let cover = |list: &[InlineSpan]| -> BTreeMap<String, BTreeSet<usize>> {
            let mut m: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
            for s in list {
                m.entry(s.marker_id.clone()).or_default().extend(s.start..s.end);
            }
            m
        };
        prop_assert_eq!(cover(&repaired), cover(&spans));
    }

    #[test]
    fn projected_spans_stay_in_bounds(n_src in 1usize..7, n_tgt in 0usize..7, i in 0usize..7, j in 0usize..7,
                                      pairs in prop::collection::vec((0usize..7, 0usize..7), 0..10)) {
        let (i, j) = (i.min(j).min(n_src), i.max(j).min(n_src));
        let words: Vec<String> = (0..n_src).map(|k| format!("s{k}")).collect();
        let mut html = String::from("<p>");
        for (k, w) in words.iter().enumerate() {
            if k > 0 { html.push(' '); }
            if k == i { html.push_str("<b>"); }
            html.push_str(w);
            if k + 1 == j { html.push_str("</b>"); }
        }
        if i == j { html.push_str("<b></b>"); }
        html.push_str("</p>");
        let doc = parse_str(&html, DocFormat::Html).unwrap();
        let seg = extract_segments(&doc, &ExtractionPolicy::default()).unwrap().remove(0);
        let text: Vec<String> = (0..n_tgt).map(|k| format!("t{k}")).collect();
        let text = text.join(" ");
        let pairs: Vec<_> = pairs.into_iter().filter(|&(a, b)| a < n_src && b < n_tgt).collect();
        let links = AlignmentLinks::from_pairs(n_src, n_tgt, &pairs);
        let out = project_segment(&seg, text.clone(), tokenize(&text), links);
        prop_assert!(spans_properly_nested(&out.spans));
        for s in &out.spans {
            prop_assert!(s.start <= s.end && s.end <= n_tgt);
        }
    }

    #[test]
    fn em_likelihood_never_decreases(pairs in corpus(), iterations in 1usize..12) {
        let corpus = ParallelCorpus::new(pairs).unwrap();
        let trained = train_model1_traced(&corpus, iterations, 1e-6).unwrap();
        for w in trained.log_likelihoods.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12, "{} -> {}", w[0], w[1]);
        }
        for (src, _) in trained.lexicon.rows() {
            prop_assert!((trained.lexicon.row_sum(src) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn chrf_is_bounded(h in "\\PC{0,20}", r in "\\PC{0,20}") {
        let s = chrf_sentence(&h, &r, &ChrFParams::default()).score;
        prop_assert!((0.0..=100.0).contains(&s), "{}", s);
    }

    #[test]
    fn chrf_of_identical_text_is_100(x in "\\PC{0,20}") {
        prop_assume!(x.chars().any(|c| !c.is_whitespace()));
        let s = chrf_sentence(&x, &x, &ChrFParams::default()).score;
        prop_assert!((s - 100.0).abs() < 1e-9);
    }

    #[test]
    fn balanced_chrf_is_symmetric(h in "[a-cš ]{0,15}", r in "[a-cš ]{0,15}") {
        let params = ChrFParams { beta: 1.0, ..ChrFParams::default() };
        let a = chrf_sentence(&h, &r, &params).score;
        let b = chrf_sentence(&r, &h, &params).score;
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn symmetrization_brackets_both_directions(n in 1usize..6, m in 1usize..6,
                                               f in prop::collection::vec((0usize..6, 0usize..6), 0..12),
                                               r in prop::collection::vec((0usize..6, 0usize..6), 0..12)) {
        let f: Vec<_> = f.into_iter().filter(|&(a, b)| a < n && b < m).collect();
        let r: Vec<_> = r.into_iter().filter(|&(a, b)| a < m && b < n).collect();
        let fwd = AlignmentLinks::from_pairs(n, m, &f);
        let rev = AlignmentLinks::from_pairs(m, n, &r);
        let inter = symmetrize(&fwd, &rev, Symmetrization::Intersection).unwrap();
        let union = symmetrize(&fwd, &rev, Symmetrization::Union).unwrap();
        let set = |l: &AlignmentLinks| l.real_links().collect::<BTreeSet<_>>();
        let (sf, sr) = (set(&fwd), rev.real_links().map(|(a, b)| (b, a)).collect::<BTreeSet<_>>());
        prop_assert_eq!(set(&inter), sf.intersection(&sr).copied().collect::<BTreeSet<_>>());
        prop_assert_eq!(set(&union), sf.union(&sr).copied().collect::<BTreeSet<_>>());
        // swapping both inputs swaps the result
        let swapped = symmetrize(&rev, &fwd, Symmetrization::Intersection).unwrap();
        prop_assert_eq!(set(&swapped), set(&inter).into_iter().map(|(a, b)| (b, a)).collect::<BTreeSet<_>>());
    }

    #[test]
    fn evalset_round_trips(texts in prop::collection::vec(("\\PC{1,12}", "\\PC{1,12}"), 1..8), dev in 0usize..8) {
        let items: Vec<EvalItem> = texts
            .into_iter()
            .enumerate()
            .map(|(i, (s, r))| EvalItem {
                item_id: format!("x{i}"),
                subject: Subject::Chemistry,
                exercise_type: "multiple_choice".into(),
                source_segments: vec![s],
                reference_segments: vec![r],
                split: if i < dev { Split::Dev } else { Split::Test },
            })
            .collect();
        prop_assert_eq!(parse_evalset(&write_evalset(&items)).unwrap(), items);
    }

    #[test]
    fn annotator_loads_differ_by_at_most_one(n_items in 1usize..30, segments in 1usize..4,
                                             annotators in 1usize..9, redundancy in 1usize..3, seed in any::<u64>()) {
        let items = items(n_items, segments);
        let runs = [SystemRun::from_references("a", &items), SystemRun::from_references("b", &items)];
        let ids: Vec<String> = (0..annotators).map(|a| format!("ann{a}")).collect();
        let options = BatchOptions { redundancy, max_segments: None };
        let batch = make_annotation_batch(&runs, &items, &ids, seed, options).unwrap();
        prop_assert_eq!(batch.tasks.len(), n_items * segments * redundancy.min(annotators));
        let mut seen = BTreeSet::new();
        for t in &batch.tasks {
            prop_assert!(seen.insert((&t.annotator_id, &t.item_id, t.segment_index)), "unit repeated for {}", t.annotator_id);
        }
        let mut load: BTreeMap<&str, usize> = ids.iter().map(|a| (a.as_str(), 0)).collect();
        for t in &batch.tasks {
            *load.get_mut(t.annotator_id.as_str()).unwrap() += 1;
        }
        let lo = *load.values().min().unwrap();
        let hi = *load.values().max().unwrap();
        prop_assert!(hi - lo <= 1, "{:?}", load);
    }

    #[test]
    fn token_offsets_slice_the_text(s in "\\PC{0,30}") {
        let tokens = tokenize(&s);
        let mut prev = 0;
        for t in &tokens {
            prop_assert!(prev <= t.start && t.start < t.end);
            prop_assert_eq!(&s[t.start..t.end], t.text.as_str());
            prev = t.end;
        }
    }
}

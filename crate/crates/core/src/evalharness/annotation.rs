use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{read_file, records, EvalItem, HarnessError, SystemRun};
use crate::metrics::{summarize_scores, ScoreSummary};

pub const MAX_SCORE: i64 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub blind_label: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub task_id: String,
    pub annotator_id: String,
    pub item_id: String,
    pub segment_index: usize,
    pub source_text: String,
    pub reference_text: String,
    pub candidates: Vec<Candidate>,
    pub permutation_seed: u64,
}

/// Blind label to system id for one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationKey {
    pub task_id: String,
    #[serde(flatten)]
    pub labels: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationBatch {
    pub tasks: Vec<AnnotationTask>,
    pub key: Vec<AnnotationKey>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchOptions {
    /// Number of annotators who see each segment.
    pub redundancy: usize,
    /// Sample this many segments (seeded) instead of using all of them.
    pub max_segments: Option<usize>,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            redundancy: 1,
            max_segments: None,
        }
    }
}

fn blind_label(i: usize) -> String {
    let mut n = i;
    let mut out = Vec::new();
    loop {
        out.push(b'A' + (n % 26) as u8);
        if n < 26 {
            break;
        }
        n = n / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

fn permutation_seed(seed: u64, annotator: &str, item: &str, segment: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in [annotator.as_bytes(), item.as_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    h.update((segment as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Builds blind annotation tasks, one per (segment, copy), dealt to the
/// annotators in turn. The label to system mapping goes to the key only.
pub fn make_annotation_batch(
    runs: &[SystemRun],
    items: &[EvalItem],
    annotators: &[String],
    seed: u64,
    options: BatchOptions,
) -> Result<AnnotationBatch, HarnessError> {
    if runs.len() < 2 {
        return Err(HarnessError::InsufficientSystems(runs.len()));
    }
    if annotators.is_empty() {
        return Err(HarnessError::NoAnnotators);
    }
    let mut missing: Vec<String> = runs.iter().flat_map(|r| r.missing_for(items)).collect();
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(HarnessError::MissingHypotheses { item_ids: missing });
    }

    let mut units: Vec<(usize, usize)> = items
        .iter()
        .enumerate()
        .flat_map(|(i, item)| (0..item.source_segments.len()).map(move |s| (i, s)))
        .collect();
    if let Some(limit) = options.max_segments.filter(|&m| m < units.len()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        units.shuffle(&mut rng);
        units.truncate(limit);
        units.sort_unstable();
    }

    let redundancy = options.redundancy.clamp(1, annotators.len());
    let mut tasks = Vec::with_capacity(units.len() * redundancy);
    let mut key = Vec::with_capacity(units.len() * redundancy);
    for (slot, &(i, s)) in units.iter().flat_map(|u| std::iter::repeat_n(u, redundancy)).enumerate() {
        let item = &items[i];
        let annotator = &annotators[slot % annotators.len()];
        let task_id = format!("t{:05}", slot + 1);
        let perm_seed = permutation_seed(seed, annotator, &item.item_id, s);
        let mut order: Vec<usize> = (0..runs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));

        let mut labels = BTreeMap::new();
        let candidates = order
            .iter()
            .enumerate()
            .map(|(pos, &r)| {
                let label = blind_label(pos);
                labels.insert(label.clone(), runs[r].system_id.clone());
                Candidate {
                    blind_label: label,
                    text: runs[r].hypotheses[&item.item_id][s].clone(),
                }
            })
            .collect();
        tasks.push(AnnotationTask {
            task_id: task_id.clone(),
            annotator_id: annotator.clone(),
            item_id: item.item_id.clone(),
            segment_index: s,
            source_text: item.source_segments[s].clone(),
            reference_text: item.reference_segments[s].clone(),
            candidates,
            permutation_seed: perm_seed,
        });
        key.push(AnnotationKey { task_id, labels });
    }
    Ok(AnnotationBatch { tasks, key })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanScore {
    pub task_id: String,
    pub blind_label: String,
    pub score: u8,
    pub annotator_id: String,
    pub timestamp: String,
}

impl HumanScore {
    /// Checks the score range; field name on failure.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if i64::from(self.score) > MAX_SCORE {
            return Err(("score", format!("{} is outside 0..={MAX_SCORE}", self.score)));
        }
        for (name, v) in [
            ("task_id", &self.task_id),
            ("blind_label", &self.blind_label),
            ("annotator_id", &self.annotator_id),
        ] {
            if v.is_empty() {
                return Err((name, "empty string".into()));
            }
        }
        Ok(())
    }
}

pub fn parse_scores(content: &str) -> Result<Vec<HumanScore>, HarnessError> {
    records(content)?
        .into_iter()
        .map(|r| {
            let score = r.int("score")?;
            if !(0..=MAX_SCORE).contains(&score) {
                return Err(HarnessError::schema(r.line, "score", format!("{score} is outside 0..={MAX_SCORE}")));
            }
            Ok(HumanScore {
                task_id: r.str("task_id")?,
                blind_label: r.str("blind_label")?,
                score: score as u8,
                annotator_id: r.str("annotator_id")?,
                timestamp: r.opt_str("timestamp")?.unwrap_or_default(),
            })
        })
        .collect()
}

pub fn parse_keys(content: &str) -> Result<Vec<AnnotationKey>, HarnessError> {
    records(content)?
        .into_iter()
        .map(|r| {
            let task_id = r.str("task_id")?;
            let mut labels = BTreeMap::new();
            for (k, v) in &r.map {
                if k == "task_id" {
                    continue;
                }
                match v {
                    serde_json::Value::String(s) => {
                        labels.insert(k.clone(), s.clone());
                    }
                    _ => return Err(HarnessError::schema(r.line, k, "expected a system id")),
                }
            }
            Ok(AnnotationKey { task_id, labels })
        })
        .collect()
}

pub fn read_key_file(path: &Path) -> Result<Vec<AnnotationKey>, HarnessError> {
    parse_keys(&read_file(path)?)
}

pub fn parse_tasks(content: &str) -> Result<Vec<AnnotationTask>, HarnessError> {
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| HarnessError::schema(n + 1, "<record>", e.to_string())))
        .collect()
}

pub fn write_jsonl<T: Serialize>(records: &[T]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("serializable") + "\n")
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub per_system: BTreeMap<String, ScoreSummary>,
    pub per_annotator: BTreeMap<String, f64>,
    pub scores_used: usize,
}

impl fmt::Display for AggregateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (system, summary) in &self.per_system {
            writeln!(f, "{system}\t{summary}\tn={}", summary.n)?;
        }
        for (annotator, mean) in &self.per_annotator {
            writeln!(f, "annotator {annotator}\t{mean:.2}")?;
        }
        Ok(())
    }
}

/// De-anonymizes scores through the key. A later score for the same
/// (task, label, annotator) replaces an earlier one.
pub fn aggregate_annotations(scores: &[HumanScore], key: &[AnnotationKey]) -> Result<AggregateReport, HarnessError> {
    let key: HashMap<&str, &BTreeMap<String, String>> = key.iter().map(|k| (k.task_id.as_str(), &k.labels)).collect();
    let mut latest: HashMap<(&str, &str, &str), (usize, &HumanScore)> = HashMap::new();
    for (i, s) in scores.iter().enumerate() {
        let labels = key
            .get(s.task_id.as_str())
            .ok_or_else(|| HarnessError::UnknownTask(s.task_id.clone()))?;
        if !labels.contains_key(&s.blind_label) {
            return Err(HarnessError::UnknownLabel {
                task_id: s.task_id.clone(),
                label: s.blind_label.clone(),
            });
        }
        if let Some((field, message)) = s.validate().err() {
            return Err(HarnessError::schema(i + 1, field, message));
        }
        latest.insert((&s.task_id, &s.blind_label, &s.annotator_id), (i, s));
    }
    let mut kept: Vec<(usize, &HumanScore)> = latest.into_values().collect();
    kept.sort_unstable_by_key(|(i, _)| *i);

    let mut by_system: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut by_annotator: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (_, s) in &kept {
        let system = &key[s.task_id.as_str()][&s.blind_label];
        by_system.entry(system.clone()).or_default().push(f64::from(s.score));
        by_annotator
            .entry(s.annotator_id.clone())
            .or_default()
            .push(f64::from(s.score));
    }
    let per_system = by_system
        .into_iter()
        .map(|(k, v)| Ok((k, summarize_scores(&v)?)))
        .collect::<Result<_, HarnessError>>()?;
    let per_annotator = by_annotator
        .into_iter()
        .map(|(k, v)| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            (k, mean)
        })
        .collect();
    Ok(AggregateReport {
        per_system,
        per_annotator,
        scores_used: kept.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorLevel {
    Lexical,
    Morphological,
    Syntactic,
}

impl ErrorLevel {
    pub const ALL: [ErrorLevel; 3] = [ErrorLevel::Lexical, ErrorLevel::Morphological, ErrorLevel::Syntactic];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminologyCause {
    ContextMistranslation,
    UnseenTerm,
    NoEquivalent,
}

impl TerminologyCause {
    pub const ALL: [TerminologyCause; 3] = [
        TerminologyCause::ContextMistranslation,
        TerminologyCause::UnseenTerm,
        TerminologyCause::NoEquivalent,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorAnnotation {
    pub task_id: String,
    pub level: ErrorLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminology_cause: Option<TerminologyCause>,
    #[serde(default)]
    pub note: String,
}

impl ErrorAnnotation {
    pub fn new(
        task_id: impl Into<String>,
        level: ErrorLevel,
        terminology_cause: Option<TerminologyCause>,
    ) -> Result<Self, HarnessError> {
        let a = Self {
            task_id: task_id.into(),
            level,
            terminology_cause,
            note: String::new(),
        };
        a.check(0)?;
        Ok(a)
    }

    pub(crate) fn check(&self, line: usize) -> Result<(), HarnessError> {
        if self.terminology_cause.is_some() && self.level != ErrorLevel::Lexical {
            return Err(HarnessError::schema(
                line,
                "terminology_cause",
                "only allowed for lexical errors",
            ));
        }
        Ok(())
    }
}

pub fn parse_error_annotations(content: &str) -> Result<Vec<ErrorAnnotation>, HarnessError> {
    let mut out = Vec::new();
    for r in records(content)? {
        let line = r.line;
        let task_id = r.str("task_id")?;
        let a: ErrorAnnotation = serde_json::from_value(serde_json::Value::Object(r.map)).map_err(|e| {
            let msg = e.to_string();
            let field = if msg.contains("variant") && msg.contains("level") {
                "level"
            } else if msg.contains("variant") {
                "terminology_cause"
            } else {
                "<record>"
            };
            HarnessError::schema(line, field, msg)
        })?;
        debug_assert_eq!(a.task_id, task_id);
        a.check(line)?;
        out.push(a);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub levels: BTreeMap<ErrorLevel, usize>,
    pub causes: BTreeMap<TerminologyCause, usize>,
}

pub fn error_summary(annotations: &[ErrorAnnotation]) -> ErrorSummary {
    let mut levels: BTreeMap<ErrorLevel, usize> = ErrorLevel::ALL.iter().map(|&l| (l, 0)).collect();
    let mut causes: BTreeMap<TerminologyCause, usize> = TerminologyCause::ALL.iter().map(|&c| (c, 0)).collect();
    for a in annotations {
        *levels.get_mut(&a.level).expect("all levels") += 1;
        if let Some(c) = a.terminology_cause {
            *causes.get_mut(&c).expect("all causes") += 1;
        }
    }
    ErrorSummary { levels, causes }
}

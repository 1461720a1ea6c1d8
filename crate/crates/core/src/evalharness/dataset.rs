use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{read_file, records, write_file, HarnessError};
use crate::metrics::{chrf_corpus, corpus_summary, BootstrapConfig, ChrFParams, ChrFReport, ScoreSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subject {
    Biology,
    Chemistry,
    Geography,
    Other,
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subject::Biology => "biology",
            Subject::Chemistry => "chemistry",
            Subject::Geography => "geography",
            Subject::Other => "other",
        })
    }
}

impl FromStr for Subject {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "biology" => Ok(Subject::Biology),
            "chemistry" => Ok(Subject::Chemistry),
            "geography" => Ok(Subject::Geography),
            "other" => Ok(Subject::Other),
            other => Err(format!("unknown subject `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalItem {
    pub item_id: String,
    pub subject: Subject,
    pub exercise_type: String,
    pub source_segments: Vec<String>,
    pub reference_segments: Vec<String>,
    pub split: Split,
}

pub fn parse_evalset(content: &str) -> Result<Vec<EvalItem>, HarnessError> {
    let recs = records(content)?;
    if recs.is_empty() {
        return Err(HarnessError::schema(0, "<file>", "no items"));
    }
    let mut seen = HashSet::new();
    let mut items = Vec::with_capacity(recs.len());
    for r in recs {
        let parse_enum = |field: &str| -> Result<String, HarnessError> { r.str(field) };
        let item = EvalItem {
            item_id: r.str("item_id")?,
            subject: parse_enum("subject")?
                .parse()
                .map_err(|m: String| HarnessError::schema(r.line, "subject", m))?,
            exercise_type: r.opt_str("exercise_type")?.unwrap_or_default(),
            source_segments: r.str_list("source_segments")?,
            reference_segments: r.str_list("reference_segments")?,
            split: parse_enum("split")?
                .parse()
                .map_err(|m: String| HarnessError::schema(r.line, "split", m))?,
        };
        if item.source_segments.is_empty() {
            return Err(HarnessError::schema(r.line, "source_segments", "empty"));
        }
        if item.source_segments.len() != item.reference_segments.len() {
            return Err(HarnessError::schema(
                r.line,
                "reference_segments",
                format!(
                    "{} references for {} sources",
                    item.reference_segments.len(),
                    item.source_segments.len()
                ),
            ));
        }
        if !seen.insert(item.item_id.clone()) {
            return Err(HarnessError::schema(r.line, "item_id", "duplicate"));
        }
        items.push(item);
    }
    Ok(items)
}

pub fn load_evalset(path: &Path) -> Result<Vec<EvalItem>, HarnessError> {
    parse_evalset(&read_file(path)?)
}

pub fn write_evalset(items: &[EvalItem]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("serializable") + "\n")
        .collect()
}

pub fn save_evalset(items: &[EvalItem], path: &Path) -> Result<(), HarnessError> {
    write_file(path, &write_evalset(items))
}

/// Number of (dev, test) items.
pub fn split_counts(items: &[EvalItem]) -> (usize, usize) {
    let dev = items.iter().filter(|i| i.split == Split::Dev).count();
    (dev, items.len() - dev)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemRun {
    pub system_id: String,
    pub hypotheses: BTreeMap<String, Vec<String>>,
}

/// Run files hold `{"item_id": ..., "hypotheses": [...]}` records; an
/// optional `system_id` on the records overrides `default_system_id`.
pub fn parse_run(content: &str, default_system_id: &str) -> Result<SystemRun, HarnessError> {
    let mut run = SystemRun {
        system_id: default_system_id.into(),
        hypotheses: BTreeMap::new(),
    };
    for r in records(content)? {
        if let Some(id) = r.opt_str("system_id")? {
            run.system_id = id;
        }
        let item = r.str("item_id")?;
        let hyps = r.str_list("hypotheses")?;
        if run.hypotheses.insert(item, hyps).is_some() {
            return Err(HarnessError::schema(r.line, "item_id", "duplicate"));
        }
    }
    Ok(run)
}

pub fn load_run(path: &Path) -> Result<SystemRun, HarnessError> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("system");
    parse_run(&read_file(path)?, stem)
}

impl SystemRun {
    pub fn from_references(system_id: &str, items: &[EvalItem]) -> Self {
        Self {
            system_id: system_id.into(),
            hypotheses: items
                .iter()
                .map(|i| (i.item_id.clone(), i.reference_segments.clone()))
                .collect(),
        }
    }

    /// Items whose hypotheses are absent or of the wrong length.
    pub fn missing_for<'a>(&self, items: impl IntoIterator<Item = &'a EvalItem>) -> Vec<String> {
        items
            .into_iter()
            .filter(|i| {
                self.hypotheses
                    .get(&i.item_id)
                    .is_none_or(|h| h.len() != i.source_segments.len())
            })
            .map(|i| i.item_id.clone())
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        self.hypotheses
            .iter()
            .map(|(item, hyps)| {
                serde_json::json!({"system_id": self.system_id, "item_id": item, "hypotheses": hyps}).to_string() + "\n"
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system_id: String,
    pub split: Split,
    pub segments: usize,
    pub chrf: ChrFReport,
    pub summary: ScoreSummary,
    pub per_subject: BTreeMap<Subject, f64>,
}

pub fn evaluate_run(
    run: &SystemRun,
    items: &[EvalItem],
    split: Split,
    bootstrap: &BootstrapConfig,
) -> Result<EvalReport, HarnessError> {
    let selected: Vec<&EvalItem> = items.iter().filter(|i| i.split == split).collect();
    if selected.is_empty() {
        return Err(HarnessError::EmptySplit(split.to_string()));
    }
    let missing = run.missing_for(selected.iter().copied());
    if !missing.is_empty() {
        return Err(HarnessError::MissingHypotheses { item_ids: missing });
    }

    let params = ChrFParams::default();
    let mut pairs: Vec<(&str, &str)> = Vec::new();
    let mut by_subject: BTreeMap<Subject, Vec<(&str, &str)>> = BTreeMap::new();
    for item in &selected {
        let hyps = &run.hypotheses[&item.item_id];
        for (h, r) in hyps.iter().zip(&item.reference_segments) {
            pairs.push((h, r));
            by_subject.entry(item.subject).or_default().push((h, r));
        }
    }
    let chrf = chrf_corpus(&pairs, &params)?;
    let summary = corpus_summary(&pairs, &params, bootstrap)?;
    let per_subject = by_subject
        .into_iter()
        .map(|(s, p)| Ok((s, chrf_corpus(&p, &params)?.score)))
        .collect::<Result<_, HarnessError>>()?;
    Ok(EvalReport {
        system_id: run.system_id.clone(),
        split,
        segments: pairs.len(),
        chrf,
        summary,
        per_subject,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"{"item_id": "b1", "subject": "biology", "exercise_type": "fill_in", "source_segments": ["Pes.", "Kočka."], "reference_segments": ["Собака.", "Кішка."], "split": "dev"}
{"item_id": "c1", "subject": "chemistry", "exercise_type": "choice", "source_segments": ["Voda."], "reference_segments": ["Вода."], "split": "test"}
"#;

    #[test]
    fn load_and_count() {
        let items = parse_evalset(TWO).unwrap();
        assert_eq!(split_counts(&items), (1, 1));
        assert_eq!(parse_evalset(&write_evalset(&items)).unwrap(), items);
    }

    #[test]
    fn schema_errors_name_line_and_field() {
        let bad = TWO.replace(r#"["Вода."]"#, r#"["Вода.", "x"]"#);
        match parse_evalset(&bad) {
            Err(HarnessError::Schema { line, field, .. }) => assert_eq!((line, field.as_str()), (2, "reference_segments")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_evalset(""), Err(HarnessError::Schema { .. })));
        let bad_subject = TWO.replace("chemistry", "physics");
        assert!(matches!(parse_evalset(&bad_subject), Err(HarnessError::Schema { line: 2, .. })));
    }

    #[test]
    fn references_score_100() {
        let items = parse_evalset(TWO).unwrap();
        let run = SystemRun::from_references("ref", &items);
        let cfg = BootstrapConfig {
            resamples: 100,
            ..Default::default()
        };
        let r = evaluate_run(&run, &items, Split::Dev, &cfg).unwrap();
        assert_eq!(r.chrf.score, 100.0);
        assert_eq!(r.summary.half_width(), 0.0);
        assert_eq!(r.segments, 2);
        assert_eq!(r.per_subject[&Subject::Biology], 100.0);
    }

    #[test]
    fn missing_hypotheses_are_listed() {
        let items = parse_evalset(TWO).unwrap();
        let mut run = SystemRun::from_references("ref", &items);
        run.hypotheses.get_mut("b1").unwrap().pop();
        match evaluate_run(&run, &items, Split::Dev, &BootstrapConfig::default()) {
            Err(HarnessError::MissingHypotheses { item_ids }) => assert_eq!(item_ids, ["b1"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn run_file_round_trip() {
        let items = parse_evalset(TWO).unwrap();
        let run = SystemRun::from_references("sys", &items);
        assert_eq!(parse_run(&run.to_jsonl(), "other").unwrap(), run);
    }
}

//! Evaluation sets, system runs, blind annotation batches and score
//! aggregation. All datasets are JSONL, one record per line.

mod annotation;
mod dataset;

use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use thiserror::Error;

use crate::metrics::MetricsError;

pub use annotation::{
    aggregate_annotations, error_summary, make_annotation_batch, parse_error_annotations, parse_keys, parse_scores,
    parse_tasks, read_key_file, write_jsonl, AggregateReport, AnnotationBatch, AnnotationKey, AnnotationTask,
    BatchOptions, Candidate, ErrorAnnotation, ErrorLevel, ErrorSummary, HumanScore, TerminologyCause,
};
pub use dataset::{
    evaluate_run, load_evalset, load_run, parse_evalset, parse_run, save_evalset, split_counts, write_evalset,
    EvalItem, EvalReport, Split, Subject, SystemRun,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("line {line}: invalid field `{field}`: {message}")]
    Schema {
        line: usize,
        field: String,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing hypotheses for items: {}", item_ids.join(", "))]
    MissingHypotheses { item_ids: Vec<String> },
    #[error("need at least 2 systems, got {0}")]
    InsufficientSystems(usize),
    #[error("no annotators given")]
    NoAnnotators,
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("task {task_id} has no label {label}")]
    UnknownLabel { task_id: String, label: String },
    #[error("split {0} has no items")]
    EmptySplit(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl HarnessError {
    pub(crate) fn schema(line: usize, field: &str, message: impl Into<String>) -> Self {
        HarnessError::Schema {
            line,
            field: field.into(),
            message: message.into(),
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, content: &str) -> Result<(), HarnessError> {
    std::fs::write(path, content).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// One JSONL object with field accessors that report the line and field
/// on failure.
pub(crate) struct Record {
    pub line: usize,
    pub map: Map<String, Value>,
}

impl Record {
    pub fn str(&self, field: &str) -> Result<String, HarnessError> {
        match self.map.get(field) {
            Some(Value::String(s)) if !s.is_empty() => Ok(s.clone()),
            Some(Value::String(_)) => Err(HarnessError::schema(self.line, field, "empty string")),
            Some(_) => Err(HarnessError::schema(self.line, field, "expected a string")),
            None => Err(HarnessError::schema(self.line, field, "missing")),
        }
    }

    pub fn opt_str(&self, field: &str) -> Result<Option<String>, HarnessError> {
        match self.map.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(HarnessError::schema(self.line, field, "expected a string")),
        }
    }

    pub fn str_list(&self, field: &str) -> Result<Vec<String>, HarnessError> {
        let Some(value) = self.map.get(field) else {
            return Err(HarnessError::schema(self.line, field, "missing"));
        };
        let Value::Array(items) = value else {
            return Err(HarnessError::schema(self.line, field, "expected a list of strings"));
        };
        items
            .iter()
            .map(|v| match v {
                Value::String(s) => Ok(s.clone()),
                _ => Err(HarnessError::schema(self.line, field, "expected a list of strings")),
            })
            .collect()
    }

    pub fn int(&self, field: &str) -> Result<i64, HarnessError> {
        match self.map.get(field) {
            Some(Value::Number(n)) => n
                .as_i64()
                .ok_or_else(|| HarnessError::schema(self.line, field, "expected an integer")),
            Some(_) => Err(HarnessError::schema(self.line, field, "expected an integer")),
            None => Err(HarnessError::schema(self.line, field, "missing")),
        }
    }
}

/// Splits JSONL content into object records, skipping blank lines.
pub(crate) fn records(content: &str) -> Result<Vec<Record>, HarnessError> {
    let mut out = Vec::new();
    for (n, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Value>(line) {
            Ok(Value::Object(map)) => out.push(Record { line: n + 1, map }),
            Ok(_) => return Err(HarnessError::schema(n + 1, "<record>", "expected a JSON object")),
            Err(e) => return Err(HarnessError::schema(n + 1, "<record>", e.to_string())),
        }
    }
    Ok(out)
}

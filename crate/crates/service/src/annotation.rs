use std::collections::HashMap;

use markmt_core::evalharness::{aggregate_annotations, AggregateReport, AnnotationKey, AnnotationTask, HarnessError, HumanScore};

use crate::store::ScoreStore;

#[derive(Debug, PartialEq, Eq)]
pub enum ScoreRejection {
    UnknownAnnotator(String),
    UnknownTask(String),
    NotAssigned { task_id: String, annotator_id: String },
    UnknownLabel { task_id: String, label: String },
}

/// Loaded annotation batch plus the score store behind the annotation
/// endpoints.
pub struct AnnotationService {
    tasks: Vec<AnnotationTask>,
    by_id: HashMap<String, usize>,
    by_annotator: HashMap<String, Vec<usize>>,
    key: Option<Vec<AnnotationKey>>,
    store: ScoreStore,
}

impl AnnotationService {
    pub fn new(tasks: Vec<AnnotationTask>, key: Option<Vec<AnnotationKey>>, store: ScoreStore) -> Self {
        let by_id = tasks.iter().enumerate().map(|(i, t)| (t.task_id.clone(), i)).collect();
        let mut by_annotator: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, t) in tasks.iter().enumerate() {
            by_annotator.entry(t.annotator_id.clone()).or_default().push(i);
        }
        Self {
            tasks,
            by_id,
            by_annotator,
            key,
            store,
        }
    }

    pub fn store(&self) -> &ScoreStore {
        &self.store
    }

    pub fn tasks(&self) -> &[AnnotationTask] {
        &self.tasks
    }

    pub fn knows_annotator(&self, annotator_id: &str) -> bool {
        self.by_annotator.contains_key(annotator_id)
    }

    fn is_done(&self, task: &AnnotationTask) -> bool {
        self.store.with_state(|s| {
            task.candidates
                .iter()
                .all(|c| s.has(&task.task_id, &c.blind_label, &task.annotator_id))
        })
    }

    /// The annotator's earliest task with an unscored candidate, with
    /// (done, total) progress. `None` for an unknown annotator.
    pub fn next(&self, annotator_id: &str) -> Option<(Option<&AnnotationTask>, usize, usize)> {
        let assigned = self.by_annotator.get(annotator_id)?;
        let mut next = None;
        let mut done = 0;
        for &i in assigned {
            let task = &self.tasks[i];
            if self.is_done(task) {
                done += 1;
            } else if next.is_none() {
                next = Some(task);
            }
        }
        Some((next, done, assigned.len()))
    }

    pub fn check(&self, score: &HumanScore) -> Result<(), ScoreRejection> {
        if !self.knows_annotator(&score.annotator_id) {
            return Err(ScoreRejection::UnknownAnnotator(score.annotator_id.clone()));
        }
        let Some(&i) = self.by_id.get(&score.task_id) else {
            return Err(ScoreRejection::UnknownTask(score.task_id.clone()));
        };
        let task = &self.tasks[i];
        if task.annotator_id != score.annotator_id {
            return Err(ScoreRejection::NotAssigned {
                task_id: score.task_id.clone(),
                annotator_id: score.annotator_id.clone(),
            });
        }
        if !task.candidates.iter().any(|c| c.blind_label == score.blind_label) {
            return Err(ScoreRejection::UnknownLabel {
                task_id: score.task_id.clone(),
                label: score.blind_label.clone(),
            });
        }
        Ok(())
    }

    pub fn completed_tasks(&self) -> usize {
        self.tasks.iter().filter(|t| self.is_done(t)).count()
    }

    /// `None` when no key file is loaded.
    pub fn summary(&self) -> Option<Result<AggregateReport, HarnessError>> {
        let key = self.key.as_ref()?;
        let scores = self.store.with_state(|s| s.scores());
        Some(aggregate_annotations(&scores, key))
    }
}

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use markmt_core::aligner::AlignmentLinks;
use markmt_core::backends::{check_terminology, BackendError, Glossary, TermFinding};
use markmt_core::docmodel::DocError;
use markmt_core::evalharness::{parse_scores, Candidate, HarnessError};
use markmt_core::pipeline::{InputFormat, Pipeline, PipelineError, TranslateOptions};
use markmt_core::segmenter::SegmentError;
use markmt_core::tagproject::{word_translation, ProjectionWarning};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::annotation::{AnnotationService, ScoreRejection};
use crate::sessions::{SessionData, SessionSegment, SessionStore};

struct Inner {
    pipeline: Pipeline,
    glossaries: HashMap<String, Glossary>,
    sessions: SessionStore,
    annotation: Option<AnnotationService>,
}

/// Shared, read-mostly state behind every handler.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(
        pipeline: Pipeline,
        glossaries: HashMap<String, Glossary>,
        sessions: SessionStore,
        annotation: Option<AnnotationService>,
    ) -> Self {
        Self(Arc::new(Inner {
            pipeline,
            glossaries,
            sessions,
            annotation,
        }))
    }

    pub fn annotation(&self) -> Option<&AnnotationService> {
        self.0.annotation.as_ref()
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.0.sessions
    }
}

pub fn router(state: AppState, max_request_bytes: usize) -> Router {
    Router::new()
        .route("/api/v1/translate", post(translate))
        .route("/api/v1/tooltip", get(tooltip))
        .route("/api/v1/annotation/next", get(next_task))
        .route("/api/v1/annotation/score", post(submit_score))
        .route("/api/v1/annotation/summary", get(summary))
        .route("/health", get(health))
        .layer(DefaultBodyLimit::max(max_request_bytes))
        .with_state(state)
}

fn error(status: StatusCode, code: &str, message: impl std::fmt::Display) -> Response {
    (status, Json(json!({ "error": code, "message": message.to_string() }))).into_response()
}

fn body_error(rejection: BytesRejection) -> Response {
    let status = rejection.status();
    let code = if status == StatusCode::PAYLOAD_TOO_LARGE {
        "payload_too_large"
    } else {
        "bad_request"
    };
    error(status, code, rejection.body_text())
}

#[derive(Deserialize)]
struct TranslateBody {
    format: String,
    content: String,
    source_lang: String,
    target_lang: String,
    #[serde(default)]
    domain: Option<String>,
    #[serde(default)]
    glossary: bool,
    #[serde(default)]
    keep_session: bool,
}

#[derive(Serialize)]
struct SegmentView<'a> {
    segment_id: &'a str,
    source_text: &'a str,
    target_text: &'a str,
    source_tokens: Vec<&'a str>,
    target_tokens: Vec<&'a str>,
    links: &'a AlignmentLinks,
    warnings: &'a [ProjectionWarning],
}

#[derive(Serialize)]
struct TranslateResponse<'a> {
    content: &'a str,
    segments: Vec<SegmentView<'a>>,
    term_findings: Vec<TermFinding>,
    backend: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    session: Option<String>,
}

fn pipeline_error(err: PipelineError) -> Response {
    match err {
        PipelineError::Markup(DocError::MalformedMarkup { line, column, message }) => (
            StatusCode::BAD_REQUEST,
            Json(json!({
                "error": "malformed_markup",
                "message": message,
                "line": line,
                "column": column,
            })),
        )
            .into_response(),
        PipelineError::Markup(e) => error(StatusCode::BAD_REQUEST, "bad_encoding", e),
        PipelineError::Segment(e @ SegmentError::NestingUnsupported { .. }) => {
            error(StatusCode::BAD_REQUEST, "unsupported_markup", e)
        }
        PipelineError::Segment(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "reinsertion_failed", e),
        PipelineError::Backend(e @ BackendError::UnsupportedPair { .. }) => {
            error(StatusCode::UNPROCESSABLE_ENTITY, "unsupported_pair", e)
        }
        PipelineError::Backend(e @ BackendError::InvalidRequest(_)) => error(StatusCode::BAD_REQUEST, "bad_request", e),
        PipelineError::Backend(e) => error(StatusCode::BAD_GATEWAY, "backend_unavailable", e),
        e @ PipelineError::LengthMismatch { .. } => error(StatusCode::BAD_GATEWAY, "backend_unavailable", e),
    }
}

async fn translate(State(app): State<AppState>, body: Result<Bytes, BytesRejection>) -> Response {
    let body = match body {
        Ok(b) => b,
        Err(r) => return body_error(r),
    };
    let req: TranslateBody = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, "bad_request", e),
    };
    let format: InputFormat = match req.format.parse() {
        Ok(f) => f,
        Err(e) => return error(StatusCode::BAD_REQUEST, "bad_request", e),
    };
    let mut options = TranslateOptions::new(format, &req.source_lang, &req.target_lang);
    options.domain = req.domain.clone();
    options.check_terms = false;

    let result = match app.0.pipeline.translate(&req.content, &options).await {
        Ok(r) => r,
        Err(e) => return pipeline_error(e),
    };

    let term_findings = match req.glossary {
        true => {
            let domain = req.domain.as_deref().unwrap_or("");
            match app.0.glossaries.get(domain).or_else(|| app.0.glossaries.get("*")) {
                Some(g) => result
                    .source_segments
                    .iter()
                    .zip(&result.translated)
                    .flat_map(|(s, t)| check_terminology(s, &t.text, g, domain))
                    .collect(),
                None => Vec::new(),
            }
        }
        false => Vec::new(),
    };

    let session = req.keep_session.then(|| {
        app.0.sessions.insert(SessionData {
            segments: result
                .source_segments
                .iter()
                .zip(&result.translated)
                .map(|(s, t)| SessionSegment {
                    segment_id: s.segment_id.clone(),
                    source_tokens: s.tokens.clone(),
                    target_tokens: t.tokens.clone(),
                    links: t.links.clone(),
                })
                .collect(),
        })
    });

    let segments = result
        .source_segments
        .iter()
        .zip(&result.translated)
        .map(|(s, t)| SegmentView {
            segment_id: &s.segment_id,
            source_text: &s.text,
            target_text: &t.text,
            source_tokens: s.tokens.iter().map(|t| t.text.as_str()).collect(),
            target_tokens: t.tokens.iter().map(|t| t.text.as_str()).collect(),
            links: &t.links,
            warnings: &t.warnings,
        })
        .collect();
    Json(TranslateResponse {
        content: &result.content,
        segments,
        term_findings,
        backend: &result.backend_id,
        session,
    })
    .into_response()
}

#[derive(Deserialize)]
struct TooltipQuery {
    session: String,
    segment: String,
    token: String,
}

async fn tooltip(State(app): State<AppState>, Query(q): Query<TooltipQuery>) -> Response {
    let Ok(index) = q.token.parse::<usize>() else {
        return error(StatusCode::BAD_REQUEST, "bad_index", format!("token `{}` is not an index", q.token));
    };
    let Some(session) = app.0.sessions.get(&q.session) else {
        return error(StatusCode::NOT_FOUND, "unknown_session", &q.session);
    };
    let Some(segment) = session.segment(&q.segment) else {
        return error(StatusCode::NOT_FOUND, "unknown_segment", &q.segment);
    };
    let Some(token) = segment.source_tokens.get(index) else {
        return error(
            StatusCode::BAD_REQUEST,
            "bad_index",
            format!("token {index} out of range 0..{}", segment.source_tokens.len()),
        );
    };
    match word_translation(index, &segment.links, &segment.target_tokens) {
        Ok(translations) => Json(json!({ "source_token": token.text, "translations": translations })).into_response(),
        Err(e) => error(StatusCode::BAD_REQUEST, "bad_index", e),
    }
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: String,
}

#[derive(Serialize)]
struct TaskView<'a> {
    task_id: &'a str,
    item_id: &'a str,
    segment_index: usize,
    source_text: &'a str,
    reference_text: &'a str,
    candidates: &'a [Candidate],
    progress: Progress,
}

#[derive(Serialize)]
struct Progress {
    done: usize,
    total: usize,
}

fn annotation_disabled() -> Response {
    error(StatusCode::NOT_FOUND, "annotation_disabled", "no annotation batch loaded")
}

async fn next_task(State(app): State<AppState>, Query(q): Query<NextQuery>) -> Response {
    let Some(ann) = app.annotation() else {
        return annotation_disabled();
    };
    match ann.next(&q.annotator) {
        None => error(StatusCode::NOT_FOUND, "unknown_annotator", &q.annotator),
        Some((None, _, _)) => StatusCode::NO_CONTENT.into_response(),
        Some((Some(task), done, total)) => Json(TaskView {
            task_id: &task.task_id,
            item_id: &task.item_id,
            segment_index: task.segment_index,
            source_text: &task.source_text,
            reference_text: &task.reference_text,
            candidates: &task.candidates,
            progress: Progress { done, total },
        })
        .into_response(),
    }
}

async fn submit_score(State(app): State<AppState>, body: Result<Bytes, BytesRejection>) -> Response {
    let Some(ann) = app.annotation() else {
        return annotation_disabled();
    };
    let body = match body {
        Ok(b) => b,
        Err(r) => return body_error(r),
    };
    let Ok(text) = std::str::from_utf8(&body) else {
        return error(StatusCode::BAD_REQUEST, "bad_request", "body is not UTF-8");
    };
    if text.lines().filter(|l| !l.trim().is_empty()).count() != 1 {
        return error(StatusCode::BAD_REQUEST, "bad_request", "expected one score record");
    }
    let mut score = match parse_scores(text) {
        Ok(mut s) => s.remove(0),
        Err(HarnessError::Schema { field, message, .. }) => {
            return (
                StatusCode::BAD_REQUEST,
                Json(json!({ "error": "invalid_score", "field": field, "message": message })),
            )
                .into_response()
        }
        Err(e) => return error(StatusCode::BAD_REQUEST, "invalid_score", e),
    };
    if let Err(rejection) = ann.check(&score) {
        return match rejection {
            ScoreRejection::UnknownAnnotator(a) => error(StatusCode::NOT_FOUND, "unknown_annotator", a),
            ScoreRejection::UnknownTask(t) => error(StatusCode::NOT_FOUND, "unknown_task", t),
            ScoreRejection::NotAssigned { task_id, annotator_id } => error(
                StatusCode::NOT_FOUND,
                "unknown_task",
                format!("task {task_id} is not assigned to {annotator_id}"),
            ),
            ScoreRejection::UnknownLabel { task_id, label } => error(
                StatusCode::BAD_REQUEST,
                "unknown_label",
                format!("task {task_id} has no candidate {label}"),
            ),
        };
    }
    if score.timestamp.is_empty() {
        score.timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
    }
    let reply = json!({
        "status": "recorded",
        "task_id": score.task_id,
        "blind_label": score.blind_label,
        "score": score.score,
    });
    match ann.store().submit(score).await {
        Ok(()) => Json(reply).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "store_failed", e),
    }
}

async fn summary(State(app): State<AppState>) -> Response {
    let Some(ann) = app.annotation() else {
        return annotation_disabled();
    };
    let report = match ann.summary() {
        None => return error(StatusCode::SERVICE_UNAVAILABLE, "no_key", "no key file loaded"),
        Some(Err(e)) => return error(StatusCode::INTERNAL_SERVER_ERROR, "aggregation_failed", e),
        Some(Ok(r)) => r,
    };
    let per_system: serde_json::Map<String, serde_json::Value> = report
        .per_system
        .iter()
        .map(|(system, s)| {
            (
                system.clone(),
                json!({ "mean": s.mean, "sd": s.sd, "n": s.n, "display": s.to_string() }),
            )
        })
        .collect();
    let state = ann.store().snapshot();
    Json(json!({
        "per_system": per_system,
        "per_annotator": report.per_annotator,
        "scores": report.scores_used,
        "appended": state.appended,
        "tasks_total": ann.tasks().len(),
        "tasks_completed": ann.completed_tasks(),
    }))
    .into_response()
}

async fn health(State(app): State<AppState>) -> Response {
    let backend = app.0.pipeline.backend();
    let status = if backend.health().await { "ok" } else { "degraded" };
    Json(json!({ "status": status, "backend": backend.id() })).into_response()
}

//! Scriptable stand-in for a remote MT endpoint, used by tests.

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use markmt_core::segmenter::tokenize;
use serde::Deserialize;
use serde_json::json;
use tokio::task::JoinHandle;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StubReply {
    /// Translate and answer 200.
    Ok,
    /// Answer with this status and an empty JSON object.
    Status(u16),
    /// Wait, then translate and answer 200.
    Delay(Duration),
    /// 200 with a body that is not the expected JSON.
    Garbage,
}

#[derive(Debug, Clone)]
pub struct StubCall {
    pub segments: Vec<String>,
    pub src_lang: String,
    pub tgt_lang: String,
    pub authorization: Option<String>,
    pub at: Instant,
}

type Translator = Arc<dyn Fn(&str) -> String + Send + Sync>;

#[derive(Clone)]
struct StubState {
    script: Arc<Mutex<VecDeque<StubReply>>>,
    calls: Arc<Mutex<Vec<StubCall>>>,
    translate: Translator,
}

#[derive(Deserialize)]
struct Body {
    src_lang: String,
    tgt_lang: String,
    segments: Vec<String>,
    #[serde(default)]
    want_alignment: bool,
}

pub struct StubMt {
    pub addr: SocketAddr,
    calls: Arc<Mutex<Vec<StubCall>>>,
    handle: JoinHandle<()>,
}

impl StubMt {
    /// Echoes segments back. Replies follow `script`, then `Ok` forever.
    pub async fn spawn(script: Vec<StubReply>) -> Self {
        Self::spawn_with(script, Arc::new(|s: &str| s.to_string())).await
    }

    pub async fn spawn_with(script: Vec<StubReply>, translate: Translator) -> Self {
        let state = StubState {
            script: Arc::new(Mutex::new(script.into())),
            calls: Arc::new(Mutex::new(Vec::new())),
            translate,
        };
        let calls = state.calls.clone();
        let app = Router::new()
            .route("/translate", post(handle).get(|| async { "stub" }))
            .with_state(state);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.expect("bind");
        let addr = listener.local_addr().expect("addr");
        let handle = tokio::spawn(async move {
            axum::serve(listener, app).await.expect("stub server");
        });
        Self { addr, calls, handle }
    }

    pub fn url(&self) -> String {
        format!("http://{}/translate", self.addr)
    }

    pub fn calls(&self) -> Vec<StubCall> {
        self.calls.lock().expect("calls").clone()
    }
}

impl Drop for StubMt {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

async fn handle(State(state): State<StubState>, headers: HeaderMap, Json(body): Json<Body>) -> Response {
    state.calls.lock().expect("calls").push(StubCall {
        segments: body.segments.clone(),
        src_lang: body.src_lang.clone(),
        tgt_lang: body.tgt_lang.clone(),
        authorization: headers
            .get("authorization")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string),
        at: Instant::now(),
    });
    let reply = state.script.lock().expect("script").pop_front().unwrap_or(StubReply::Ok);
    match reply {
        StubReply::Status(code) => {
            let status = StatusCode::from_u16(code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            (status, Json(json!({}))).into_response()
        }
        StubReply::Garbage => (StatusCode::OK, "not json").into_response(),
        StubReply::Delay(d) => {
            tokio::time::sleep(d).await;
            translate(&state, &body).into_response()
        }
        StubReply::Ok => translate(&state, &body).into_response(),
    }
}

fn translate(state: &StubState, body: &Body) -> Json<serde_json::Value> {
    let translations: Vec<String> = body.segments.iter().map(|s| (state.translate)(s)).collect();
    if !body.want_alignment {
        return Json(json!({ "translations": translations }));
    }
    // Links i-i up to the shorter side.
    let alignments: Vec<Vec<[i64; 2]>> = body
        .segments
        .iter()
        .zip(&translations)
        .map(|(s, t)| {
            let n = tokenize(s).len().min(tokenize(t).len());
            (0..n as i64).map(|i| [i, i]).collect()
        })
        .collect();
    Json(json!({ "translations": translations, "alignments": alignments }))
}

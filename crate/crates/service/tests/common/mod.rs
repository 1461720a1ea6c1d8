#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use markmt_core::backends::{Backend, DictionaryBackend, Glossary, IdentityBackend};
use markmt_core::pipeline::Pipeline;
use markmt_service::{spawn_state, AnnotationService, AppState, RunningServer, SessionStore};

pub const MAX_BYTES: usize = 1 << 20;

pub fn dictionary() -> DictionaryBackend {
    DictionaryBackend::new("cs", "uk")
        .with_entry("pes", "собака")
        .with_entry("voda", "вода")
        .with_entry("je", "це")
        .with_entry("velký", "великий")
}

pub struct Setup {
    pub backend: Arc<dyn Backend>,
    pub glossaries: HashMap<String, Glossary>,
    pub ttl: Duration,
    pub capacity: usize,
    pub annotation: Option<AnnotationService>,
    pub max_bytes: usize,
}

impl Default for Setup {
    fn default() -> Self {
        Self {
            backend: Arc::new(IdentityBackend),
            glossaries: HashMap::new(),
            ttl: Duration::from_secs(1800),
            capacity: 64,
            annotation: None,
            max_bytes: MAX_BYTES,
        }
    }
}

impl Setup {
    pub async fn spawn(self) -> RunningServer {
        let state = AppState::new(
            Pipeline::new(self.backend),
            self.glossaries,
            SessionStore::new(self.ttl, self.capacity),
            self.annotation,
        );
        spawn_state(state, "127.0.0.1:0", self.max_bytes).await.expect("server")
    }
}

pub async fn identity_server() -> RunningServer {
    Setup::default().spawn().await
}

pub fn translate_body(format: &str, content: &str) -> serde_json::Value {
    serde_json::json!({
        "format": format,
        "content": content,
        "source_lang": "cs",
        "target_lang": "uk",
    })
}

pub async fn post_json(url: &str, body: &serde_json::Value) -> (u16, serde_json::Value) {
    let r = reqwest::Client::new().post(url).json(body).send().await.expect("request");
    let status = r.status().as_u16();
    let text = r.text().await.expect("body");
    (status, serde_json::from_str(&text).unwrap_or(serde_json::Value::Null))
}

pub async fn get_json(url: &str) -> (u16, serde_json::Value) {
    let r = reqwest::get(url).await.expect("request");
    let status = r.status().as_u16();
    let text = r.text().await.expect("body");
    (status, serde_json::from_str(&text).unwrap_or(serde_json::Value::Null))
}

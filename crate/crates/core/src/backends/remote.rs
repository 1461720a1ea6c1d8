use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use super::{check_pair, Backend, BackendError, TranslationRequest, TranslationResult};
use crate::aligner::{AlignmentLinks, Link};
use crate::segmenter::tokenize;

fn default_timeout_ms() -> u64 {
    10_000
}
fn default_max_retries() -> u32 {
    3
}
fn default_backoff_base_ms() -> u64 {
    250
}
fn default_max_batch_chars() -> usize {
    8000
}
fn default_max_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint_url: String,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env_name: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_base_ms")]
    pub backoff_base_ms: u64,
    #[serde(default = "default_max_batch_chars")]
    pub max_batch_chars: usize,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    /// `[source, target]` pairs; empty means any pair.
    #[serde(default)]
    pub language_pairs: Vec<(String, String)>,
}

impl RemoteConfig {
    pub fn new(endpoint_url: impl Into<String>) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            api_key_env_name: None,
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            backoff_base_ms: default_backoff_base_ms(),
            max_batch_chars: default_max_batch_chars(),
            max_in_flight: default_max_in_flight(),
            language_pairs: Vec::new(),
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    src_lang: &'a str,
    tgt_lang: &'a str,
    segments: &'a [String],
    want_alignment: bool,
}

#[derive(Deserialize)]
struct WireResponse {
    translations: Vec<String>,
    #[serde(default)]
    alignments: Option<Vec<Vec<Link>>>,
}

/// Client for the JSON translation API.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::Client,
    permits: Arc<Semaphore>,
}

/// Translations plus optional per-segment links.
type Reply = (Vec<String>, Option<Vec<Vec<Link>>>);

enum Attempt {
    Done(Result<Reply, BackendError>),
    Retry(BackendError),
}

/// Groups consecutive segments so that each group stays within
/// `max_chars` characters. A segment longer than the limit travels alone.
pub(crate) fn chunk_segments(segments: &[String], max_chars: usize) -> Vec<std::ops::Range<usize>> {
    let mut chunks = Vec::new();
    let mut start = 0;
    let mut size = 0;
    for (i, s) in segments.iter().enumerate() {
        let len = s.chars().count();
        if i > start && size + len > max_chars {
            chunks.push(start..i);
            start = i;
            size = 0;
        }
        size += len;
    }
    if start < segments.len() {
        chunks.push(start..segments.len());
    }
    chunks
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .expect("http client");
        let permits = Arc::new(Semaphore::new(config.max_in_flight.max(1)));
        Self {
            config,
            client,
            permits,
        }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn api_key(&self) -> Option<String> {
        self.config
            .api_key_env_name
            .as_deref()
            .and_then(|name| std::env::var(name).ok())
    }

    async fn attempt(&self, request: &TranslationRequest, segments: &[String]) -> Attempt {
        let body = WireRequest {
            src_lang: &request.source_lang,
            tgt_lang: &request.target_lang,
            segments,
            want_alignment: request.want_alignment,
        };
        let mut call = self.client.post(&self.config.endpoint_url).json(&body);
        if let Some(key) = self.api_key() {
            call = call.bearer_auth(key);
        }
        let response = match call.send().await {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(BackendError::Timeout),
            Err(e) => {
                return Attempt::Retry(BackendError::Unavailable {
                    retryable: true,
                    message: e.to_string(),
                })
            }
        };
        let status = response.status().as_u16();
        match status {
            200..=299 => {}
            401 | 403 => return Attempt::Done(Err(BackendError::Auth(format!("HTTP {status}")))),
            422 => {
                return Attempt::Done(Err(BackendError::UnsupportedPair {
                    src: request.source_lang.clone(),
                    tgt: request.target_lang.clone(),
                }))
            }
            408 | 429 | 500..=599 => {
                return Attempt::Retry(BackendError::Unavailable {
                    retryable: true,
                    message: format!("HTTP {status}"),
                })
            }
            _ => {
                return Attempt::Done(Err(BackendError::Unavailable {
                    retryable: false,
                    message: format!("HTTP {status}"),
                }))
            }
        }
        let bytes = match response.bytes().await {
            Ok(b) => b,
            Err(e) if e.is_timeout() => return Attempt::Retry(BackendError::Timeout),
            Err(e) => return Attempt::Done(Err(BackendError::Protocol(e.to_string()))),
        };
        let wire: WireResponse = match serde_json::from_slice(&bytes) {
            Ok(w) => w,
            Err(e) => return Attempt::Done(Err(BackendError::Protocol(e.to_string()))),
        };
        if wire.translations.len() != segments.len() {
            return Attempt::Done(Err(BackendError::Protocol(format!(
                "{} translations for {} segments",
                wire.translations.len(),
                segments.len()
            ))));
        }
        if wire.alignments.as_ref().is_some_and(|a| a.len() != segments.len()) {
            return Attempt::Done(Err(BackendError::Protocol("alignment count differs".into())));
        }
        Attempt::Done(Ok((wire.translations, wire.alignments)))
    }

    async fn send_chunk(
        &self,
        request: &TranslationRequest,
        segments: &[String],
    ) -> Result<(Vec<String>, Option<Vec<Vec<Link>>>), BackendError> {
        let _permit = self.permits.acquire().await.expect("semaphore open");
        let mut attempt = 0;
        loop {
            match self.attempt(request, segments).await {
                Attempt::Done(result) => return result,
                Attempt::Retry(err) if attempt >= self.config.max_retries => return Err(err),
                Attempt::Retry(_) => {
                    let delay = self.config.backoff_base_ms.saturating_mul(1 << attempt.min(20));
                    tokio::time::sleep(Duration::from_millis(delay)).await;
                    attempt += 1;
                }
            }
        }
    }
}

#[async_trait]
impl Backend for RemoteBackend {
    fn id(&self) -> &str {
        "remote"
    }

    fn supports(&self, source_lang: &str, target_lang: &str) -> bool {
        self.config.language_pairs.is_empty()
            || self
                .config
                .language_pairs
                .iter()
                .any(|(s, t)| s.eq_ignore_ascii_case(source_lang) && t.eq_ignore_ascii_case(target_lang))
    }

    async fn translate_batch(&self, request: &TranslationRequest) -> Result<TranslationResult, BackendError> {
        let started = Instant::now();
        check_pair(self, request)?;
        let chunks = chunk_segments(&request.segments, self.config.max_batch_chars);
        let results = futures::future::join_all(
            chunks
                .iter()
                .map(|range| self.send_chunk(request, &request.segments[range.clone()])),
        )
        .await;

        let mut translations = Vec::with_capacity(request.segments.len());
        let mut wire_links: Vec<Option<Vec<Link>>> = Vec::with_capacity(request.segments.len());
        for result in results {
            let (t, a) = result?;
            match a {
                Some(a) => wire_links.extend(a.into_iter().map(Some)),
                None => wire_links.extend(std::iter::repeat_n(None, t.len())),
            }
            translations.extend(t);
        }

        let alignments = if request.want_alignment && wire_links.iter().all(Option::is_some) {
            let mut out = Vec::with_capacity(translations.len());
            for ((src, tgt), links) in request.segments.iter().zip(&translations).zip(wire_links) {
                let mut a = AlignmentLinks::new(tokenize(src).len(), tokenize(tgt).len());
                a.links.extend(links.unwrap_or_default());
                if !a.in_bounds() {
                    return Err(BackendError::Protocol("alignment index out of bounds".into()));
                }
                out.push(a);
            }
            Some(out)
        } else {
            None
        };
        Ok(TranslationResult {
            translations,
            alignments,
            backend_id: self.id().into(),
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }

    /// Reachable when the endpoint answers HTTP at all.
    async fn health(&self) -> bool {
        self.client
            .get(&self.config.endpoint_url)
            .timeout(Duration::from_millis(self.config.timeout_ms.min(2000)))
            .send()
            .await
            .is_ok()
    }
}

//! HTTP service for document translation, word tooltips and the blind
//! annotation workflow.

pub mod annotation;
pub mod config;
pub mod routes;
pub mod sessions;
pub mod store;
pub mod stub;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use markmt_core::aligner::{LexiconTable, DEFAULT_FLOOR};
use markmt_core::backends::{Backend, DictionaryBackend, Glossary, IdentityBackend, RemoteBackend};
use markmt_core::evalharness::{parse_tasks, read_key_file};
use markmt_core::pipeline::{AlignmentModel, Pipeline};
use thiserror::Error;
use tokio::task::JoinHandle;

pub use annotation::AnnotationService;
pub use config::{BackendConfig, ConfigError, ServiceConfig};
pub use routes::{router, AppState};
pub use sessions::SessionStore;
pub use store::{replay, ScoreState, ScoreStore};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot load {what}: {message}")]
    Load { what: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn load_err(what: impl std::fmt::Display, e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Load {
        what: what.to_string(),
        message: e.to_string(),
    }
}

pub fn build_backend(config: &BackendConfig) -> Result<Arc<dyn Backend>, ServiceError> {
    Ok(match config {
        BackendConfig::Identity => Arc::new(IdentityBackend),
        BackendConfig::Dictionary {
            path,
            source_lang,
            target_lang,
        } => Arc::new(
            DictionaryBackend::load_tsv(path, source_lang, target_lang).map_err(|e| load_err(path.display(), e))?,
        ),
        BackendConfig::Remote(remote) => Arc::new(RemoteBackend::new(remote.clone())),
    })
}

/// Loads everything the config points at. Must run inside a tokio runtime.
pub async fn build_state(config: &ServiceConfig) -> Result<AppState, ServiceError> {
    config.validate()?;
    let backend = build_backend(&config.backend)?;
    let mut pipeline = Pipeline::new(backend);
    if let Some(paths) = &config.alignment {
        let forward = LexiconTable::load_tsv(&paths.forward, DEFAULT_FLOOR)
            .map_err(|e| load_err(paths.forward.display(), e))?;
        let reverse = match &paths.reverse {
            Some(p) => Some(LexiconTable::load_tsv(p, DEFAULT_FLOOR).map_err(|e| load_err(p.display(), e))?),
            None => None,
        };
        pipeline = pipeline.with_alignment(AlignmentModel {
            forward: Some(forward),
            reverse,
        });
    }

    let mut glossaries = HashMap::new();
    for (domain, path) in &config.glossaries {
        let g = Glossary::load_tsv(path).map_err(|e| load_err(path.display(), e))?;
        glossaries.insert(domain.clone(), g);
    }

    let annotation = match &config.annotation {
        Some(paths) => {
            let text = std::fs::read_to_string(&paths.tasks).map_err(|e| load_err(paths.tasks.display(), e))?;
            let tasks = parse_tasks(&text).map_err(|e| load_err(paths.tasks.display(), e))?;
            let key = match &paths.key {
                Some(k) => Some(read_key_file(k).map_err(|e| load_err(k.display(), e))?),
                None => None,
            };
            let store = ScoreStore::open(&paths.scores)
                .await
                .map_err(|e| load_err(paths.scores.display(), e))?;
            Some(AnnotationService::new(tasks, key, store))
        }
        None => None,
    };

    let sessions = SessionStore::new(Duration::from_millis(config.sessions.ttl_ms), config.sessions.capacity);
    Ok(AppState::new(pipeline, glossaries, sessions, annotation))
}

/// A server bound and serving in the background.
pub struct RunningServer {
    pub addr: SocketAddr,
    pub state: AppState,
    handle: JoinHandle<()>,
}

impl RunningServer {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub fn shutdown(self) {
        self.handle.abort();
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

pub async fn spawn_state(state: AppState, listen: &str, max_request_bytes: usize) -> Result<RunningServer, ServiceError> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    let addr = listener.local_addr()?;
    let app = router(state.clone(), max_request_bytes);
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!("server stopped: {e}");
        }
    });
    Ok(RunningServer { addr, state, handle })
}

pub async fn spawn(config: &ServiceConfig) -> Result<RunningServer, ServiceError> {
    let state = build_state(config).await?;
    spawn_state(state, &config.listen, config.max_request_bytes).await
}

/// Serves until ctrl-c.
pub async fn serve(config: &ServiceConfig) -> Result<(), ServiceError> {
    let state = build_state(config).await?;
    let listener = tokio::net::TcpListener::bind(&config.listen).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    let app = router(state, config.max_request_bytes);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

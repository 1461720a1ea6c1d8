use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use markmt_core::backends::RemoteConfig;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

fn default_max_request_bytes() -> usize {
    1024 * 1024
}

fn default_ttl_ms() -> u64 {
    30 * 60 * 1000
}

fn default_capacity() -> usize {
    1024
}

fn default_source_lang() -> String {
    "cs".into()
}

fn default_target_lang() -> String {
    "uk".into()
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    #[default]
    Identity,
    Dictionary {
        path: PathBuf,
        #[serde(default = "default_source_lang")]
        source_lang: String,
        #[serde(default = "default_target_lang")]
        target_lang: String,
    },
    Remote(RemoteConfig),
}

impl BackendConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            BackendConfig::Identity => "identity",
            BackendConfig::Dictionary { .. } => "dictionary",
            BackendConfig::Remote(_) => "remote",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AlignmentPaths {
    pub forward: PathBuf,
    pub reverse: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AnnotationPaths {
    /// JSONL annotation tasks.
    pub tasks: PathBuf,
    /// JSONL blind-label key; needed only for the summary endpoint.
    pub key: Option<PathBuf>,
    /// Append-only JSONL score store; created when absent.
    pub scores: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub struct SessionConfig {
    #[serde(default = "default_ttl_ms")]
    pub ttl_ms: u64,
    #[serde(default = "default_capacity")]
    pub capacity: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            ttl_ms: default_ttl_ms(),
            capacity: default_capacity(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    #[serde(default = "default_max_request_bytes")]
    pub max_request_bytes: usize,
    #[serde(default)]
    pub backend: BackendConfig,
    /// Glossary TSV per domain.
    #[serde(default)]
    pub glossaries: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub alignment: Option<AlignmentPaths>,
    #[serde(default)]
    pub annotation: Option<AnnotationPaths>,
    #[serde(default)]
    pub sessions: SessionConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

impl ServiceConfig {
    pub fn parse(content: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(content).map_err(|e| ConfigError::Syntax {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Reads a TOML config; relative paths are taken from the config's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let content = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::parse(&content, path)?;
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let BackendConfig::Dictionary { path, .. } = &mut self.backend {
            fix(path);
        }
        self.glossaries.values_mut().for_each(fix);
        if let Some(a) = &mut self.alignment {
            fix(&mut a.forward);
            if let Some(r) = &mut a.reverse {
                fix(r);
            }
        }
        if let Some(a) = &mut self.annotation {
            fix(&mut a.tasks);
            fix(&mut a.scores);
            if let Some(k) = &mut a.key {
                fix(k);
            }
        }
    }

    /// Switches to the named backend. The identity backend needs no
    /// settings; the others must already be configured.
    pub fn select_backend(&mut self, kind: &str) -> Result<(), ConfigError> {
        if self.backend.kind() == kind {
            return Ok(());
        }
        match kind {
            "identity" => {
                self.backend = BackendConfig::Identity;
                Ok(())
            }
            "dictionary" | "remote" => Err(ConfigError::Invalid(format!(
                "backend `{kind}` needs a [backend] section with kind = \"{kind}\" in the config file"
            ))),
            other => Err(ConfigError::Invalid(format!(
                "unknown backend `{other}` (expected identity, dictionary or remote)"
            ))),
        }
    }

    /// Every input path must exist; the score store's directory must exist.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut required: Vec<&Path> = Vec::new();
        if let BackendConfig::Dictionary { path, .. } = &self.backend {
            required.push(path);
        }
        required.extend(self.glossaries.values().map(PathBuf::as_path));
        if let Some(a) = &self.alignment {
            required.push(&a.forward);
            required.extend(a.reverse.as_deref());
        }
        if let Some(a) = &self.annotation {
            required.push(&a.tasks);
            required.extend(a.key.as_deref());
            if let Some(dir) = a.scores.parent().filter(|d| !d.as_os_str().is_empty()) {
                required.push(dir);
            }
        }
        for p in required {
            if !p.exists() {
                return Err(ConfigError::Invalid(format!("{} does not exist", p.display())));
            }
        }
        if self.max_request_bytes == 0 {
            return Err(ConfigError::Invalid("max_request_bytes must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ServiceConfig::default();
        assert_eq!(c.listen, "127.0.0.1:8080");
        assert_eq!(c.max_request_bytes, 1 << 20);
        assert_eq!(c.backend, BackendConfig::Identity);
        assert_eq!(c.sessions.ttl_ms, 1_800_000);
    }

    #[test]
    fn full_file_with_relative_paths() {
        let text = r#"
listen = "0.0.0.0:9000"

[backend]
kind = "remote"
endpoint_url = "http://mt.local/translate"
api_key_env_name = "MT_KEY"
max_retries = 1

[glossaries]
biology = "terms/bio.tsv"

[annotation]
tasks = "ann/tasks.jsonl"
key = "ann/key.jsonl"
scores = "/var/scores.jsonl"
"#;
        let mut c = ServiceConfig::parse(text, Path::new("x.toml")).unwrap();
        c.resolve_paths(Path::new("/etc/markmt"));
        let BackendConfig::Remote(r) = &c.backend else { panic!() };
        assert_eq!((r.max_retries, r.timeout_ms), (1, 10_000));
        assert_eq!(c.glossaries["biology"], Path::new("/etc/markmt/terms/bio.tsv"));
        let a = c.annotation.unwrap();
        assert_eq!(a.scores, Path::new("/var/scores.jsonl"));
        assert_eq!(a.key.unwrap(), Path::new("/etc/markmt/ann/key.jsonl"));
    }

    #[test]
    fn backend_selection() {
        let mut c = ServiceConfig::default();
        assert!(c.select_backend("dictionary").is_err());
        assert!(c.select_backend("bogus").is_err());
        c.select_backend("identity").unwrap();
        assert!(ServiceConfig::parse("nonsense = 1", Path::new("x")).is_err());
    }

    #[test]
    fn missing_paths_fail_validation() {
        let mut c = ServiceConfig::default();
        c.glossaries.insert("biology".into(), "/nonexistent/g.tsv".into());
        assert!(c.validate().is_err());
    }
}

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::sentences::Abbreviations;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Which elements are inline formatting, which subtrees are skipped, which
/// attributes carry translatable text, and the abbreviation list used for
/// sentence splitting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionPolicy {
    pub inline_tags: BTreeSet<String>,
    pub skip_tags: BTreeSet<String>,
    pub translatable_attributes: Vec<String>,
    pub abbreviations: Abbreviations,
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for ExtractionPolicy {
    fn default() -> Self {
        Self {
            inline_tags: set(&[
                "a", "abbr", "b", "br", "code", "em", "i", "img", "input", "label", "small", "span", "strong",
                "sub", "sup", "u",
            ]),
            skip_tags: set(&["script", "style"]),
            translatable_attributes: vec!["alt".into(), "title".into(), "placeholder".into()],
            abbreviations: Abbreviations::czech(),
        }
    }
}

impl ExtractionPolicy {
    pub fn is_inline(&self, name: &str) -> bool {
        self.inline_tags.contains(name) && !self.skip_tags.contains(name)
    }

    pub fn is_skipped(&self, name: &str) -> bool {
        self.skip_tags.contains(name)
    }

    /// Reads a `key = value` config file. Keys: `inline_tags`, `skip_tags`,
    /// `translatable_attributes` (comma-separated lists) and
    /// `abbreviations_path` (relative to the config file). Keys not present
    /// keep their defaults.
    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let content = std::fs::read_to_string(path).map_err(|source| PolicyError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&content, path.parent())
    }

    pub fn parse(content: &str, base_dir: Option<&Path>) -> Result<Self, PolicyError> {
        let mut policy = Self::default();
        for (n, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once(['=', ':']) else {
                return Err(PolicyError::Syntax {
                    line: n + 1,
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            let value = value.trim();
            let list = || -> Vec<String> {
                value
                    .split(',')
                    .map(|s| s.trim().to_ascii_lowercase())
                    .filter(|s| !s.is_empty())
                    .collect()
            };
            match key.trim() {
                "inline_tags" => policy.inline_tags = list().into_iter().collect(),
                "skip_tags" => policy.skip_tags = list().into_iter().collect(),
                "translatable_attributes" => policy.translatable_attributes = list(),
                "abbreviations_path" => {
                    let path = match base_dir {
                        Some(dir) => dir.join(value),
                        None => PathBuf::from(value),
                    };
                    policy.abbreviations =
                        Abbreviations::load(&path).map_err(|source| PolicyError::Io { path, source })?;
                }
                other => {
                    return Err(PolicyError::Syntax {
                        line: n + 1,
                        message: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        Ok(policy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let p = ExtractionPolicy::default();
        assert!(p.is_inline("b") && p.is_inline("span"));
        assert!(p.is_inline("input") && p.is_inline("br") && p.is_inline("img"));
        assert!(!p.is_inline("p"));
        assert!(p.is_skipped("script"));
        assert_eq!(p.translatable_attributes, ["alt", "title", "placeholder"]);
        assert!(p.abbreviations.contains("tzv."));
    }

    #[test]
    fn config_file_overrides() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("abbr.txt"), "např\n").unwrap();
        let cfg = "# policy\ninline_tags = b, I\nskip_tags: script\ntranslatable_attributes =\nabbreviations_path = abbr.txt\n";
        std::fs::write(dir.path().join("policy.conf"), cfg).unwrap();
        let p = ExtractionPolicy::load(&dir.path().join("policy.conf")).unwrap();
        assert_eq!(p.inline_tags, set(&["b", "i"]));
        assert!(p.translatable_attributes.is_empty());
        assert!(p.abbreviations.contains("Např."));
        assert_eq!(p.abbreviations.len(), 1);
    }

    #[test]
    fn bad_lines_are_reported() {
        let err = ExtractionPolicy::parse("inline_tags = b\nnonsense\n", None).unwrap_err();
        assert!(matches!(err, PolicyError::Syntax { line: 2, .. }));
        assert!(ExtractionPolicy::parse("colour = red", None).is_err());
    }
}

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use markmt_core::evalharness::{parse_scores, HumanScore};
use tokio::io::AsyncWriteExt;
use tokio::sync::{mpsc, oneshot};

/// (task_id, blind_label, annotator_id)
pub type ScoreKey = (String, String, String);

/// What the score file says once replayed: the latest score per key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScoreState {
    pub latest: BTreeMap<ScoreKey, HumanScore>,
    /// Records in the file, overwritten ones included.
    pub appended: usize,
}

impl ScoreState {
    pub fn apply(&mut self, score: HumanScore) {
        let key = (score.task_id.clone(), score.blind_label.clone(), score.annotator_id.clone());
        self.latest.insert(key, score);
        self.appended += 1;
    }

    pub fn has(&self, task_id: &str, blind_label: &str, annotator_id: &str) -> bool {
        self.latest
            .contains_key(&(task_id.to_string(), blind_label.to_string(), annotator_id.to_string()))
    }

    pub fn scores(&self) -> Vec<HumanScore> {
        self.latest.values().cloned().collect()
    }
}

/// Rebuilds the state from a score file. A final line without its newline
/// is a torn write and is ignored; any other bad line is an error.
pub fn replay(path: &Path) -> io::Result<ScoreState> {
    let content = match std::fs::read_to_string(path) {
        Ok(c) => c,
        Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(e),
    };
    replay_str(&content).map(|(state, _)| state)
}

/// Returns the state and the byte length of the intact prefix.
fn replay_str(content: &str) -> io::Result<(ScoreState, usize)> {
    let complete = match content.rfind('\n') {
        Some(i) => i + 1,
        None => 0,
    };
    let tail = &content[complete..];
    let mut state = ScoreState::default();
    let scores = parse_scores(&content[..complete]).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    scores.into_iter().for_each(|s| state.apply(s));
    if !tail.trim().is_empty() {
        tracing::warn!("ignoring incomplete final score record");
    }
    Ok((state, complete))
}

type Job = (HumanScore, oneshot::Sender<io::Result<()>>);

/// Append-only JSONL score file with one writer task. Handlers submit
/// through a queue; the in-memory state changes only after the line is
/// written and flushed.
#[derive(Clone)]
pub struct ScoreStore {
    path: PathBuf,
    tx: mpsc::Sender<Job>,
    state: Arc<RwLock<ScoreState>>,
}

impl ScoreStore {
    pub async fn open(path: &Path) -> io::Result<Self> {
        let content = match tokio::fs::read_to_string(path).await {
            Ok(c) => c,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(e),
        };
        let (initial, intact) = replay_str(&content)?;
        let mut file = tokio::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .await?;
        if intact < content.len() {
            file.set_len(intact as u64).await?;
        }

        let state = Arc::new(RwLock::new(initial));
        let (tx, mut rx) = mpsc::channel::<Job>(256);
        let writer_state = state.clone();
        tokio::spawn(async move {
            while let Some((score, reply)) = rx.recv().await {
                let mut line = serde_json::to_string(&score).expect("serializable");
                line.push('\n');
                let result = async {
                    file.write_all(line.as_bytes()).await?;
                    file.flush().await?;
                    file.sync_data().await
                }
                .await;
                if result.is_ok() {
                    writer_state.write().expect("score lock").apply(score);
                }
                let _ = reply.send(result);
            }
        });
        Ok(Self {
            path: path.to_path_buf(),
            tx,
            state,
        })
    }

    pub async fn submit(&self, score: HumanScore) -> io::Result<()> {
        let (reply, done) = oneshot::channel();
        self.tx
            .send((score, reply))
            .await
            .map_err(|_| io::Error::other("score writer stopped"))?;
        done.await.map_err(|_| io::Error::other("score writer stopped"))?
    }

    pub fn snapshot(&self) -> ScoreState {
        self.state.read().expect("score lock").clone()
    }

    pub fn with_state<R>(&self, f: impl FnOnce(&ScoreState) -> R) -> R {
        f(&self.state.read().expect("score lock"))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(task: &str, label: &str, value: u8) -> HumanScore {
        HumanScore {
            task_id: task.into(),
            blind_label: label.into(),
            score: value,
            annotator_id: "a1".into(),
            timestamp: "2026-01-01T00:00:00Z".into(),
        }
    }

    #[tokio::test]
    async fn submits_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.jsonl");
        let store = ScoreStore::open(&path).await.unwrap();
        store.submit(score("t1", "A", 4)).await.unwrap();
        store.submit(score("t1", "B", 6)).await.unwrap();
        store.submit(score("t1", "A", 9)).await.unwrap();
        let snap = store.snapshot();
        assert_eq!(snap.appended, 3);
        assert_eq!(snap.latest.len(), 2);
        assert_eq!(replay(&path).unwrap(), snap);
        drop(store);
        let reopened = ScoreStore::open(&path).await.unwrap();
        assert_eq!(reopened.snapshot(), snap);
    }

    #[tokio::test]
    async fn torn_tail_is_dropped_and_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.jsonl");
        let good = serde_json::to_string(&score("t1", "A", 5)).unwrap();
        std::fs::write(&path, format!("{good}\n{{\"task_id\": \"t2\", \"bl")).unwrap();
        let store = ScoreStore::open(&path).await.unwrap();
        assert_eq!(store.snapshot().appended, 1);
        store.submit(score("t2", "A", 7)).await.unwrap();
        assert_eq!(replay(&path).unwrap(), store.snapshot());
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.jsonl");
        std::fs::write(&path, "garbage\n").unwrap();
        assert!(replay(&path).is_err());
        assert_eq!(replay(&dir.path().join("absent.jsonl")).unwrap(), ScoreState::default());
    }
}

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use markmt_core::aligner::AlignmentLinks;
use markmt_core::segmenter::Token;

/// Token data kept for tooltips on one translated segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionSegment {
    pub segment_id: String,
    pub source_tokens: Vec<Token>,
    pub target_tokens: Vec<Token>,
    pub links: AlignmentLinks,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SessionData {
    pub segments: Vec<SessionSegment>,
}

impl SessionData {
    pub fn segment(&self, segment_id: &str) -> Option<&SessionSegment> {
        self.segments.iter().find(|s| s.segment_id == segment_id)
    }
}

struct Entry {
    data: Arc<SessionData>,
    last_used: Instant,
}

/// In-memory sessions that expire after `ttl` without use; the least
/// recently used one is evicted when the store is full.
pub struct SessionStore {
    ttl: Duration,
    capacity: usize,
    entries: Mutex<HashMap<String, Entry>>,
}

impl SessionStore {
    pub fn new(ttl: Duration, capacity: usize) -> Self {
        Self {
            ttl,
            capacity: capacity.max(1),
            entries: Mutex::new(HashMap::new()),
        }
    }

    pub fn insert(&self, data: SessionData) -> String {
        self.insert_at(data, Instant::now())
    }

    pub fn get(&self, id: &str) -> Option<Arc<SessionData>> {
        self.get_at(id, Instant::now())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("session lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert_at(&self, data: SessionData, now: Instant) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let mut entries = self.entries.lock().expect("session lock");
        if entries.len() >= self.capacity {
            entries.retain(|_, e| now.saturating_duration_since(e.last_used) < self.ttl);
        }
        while entries.len() >= self.capacity {
            let oldest = entries
                .iter()
                .min_by_key(|(_, e)| e.last_used)
                .map(|(k, _)| k.clone())
                .expect("non-empty");
            entries.remove(&oldest);
        }
        entries.insert(
            id.clone(),
            Entry {
                data: Arc::new(data),
                last_used: now,
            },
        );
        id
    }

    pub fn get_at(&self, id: &str, now: Instant) -> Option<Arc<SessionData>> {
        let mut entries = self.entries.lock().expect("session lock");
        let entry = entries.get_mut(id)?;
        if now.saturating_duration_since(entry.last_used) >= self.ttl {
            entries.remove(id);
            return None;
        }
        entry.last_used = now;
        Some(entry.data.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expiry_is_measured_from_last_use() {
        let store = SessionStore::new(Duration::from_secs(10), 4);
        let t0 = Instant::now();
        let id = store.insert_at(SessionData::default(), t0);
        assert!(store.get_at(&id, t0 + Duration::from_secs(9)).is_some());
        assert!(store.get_at(&id, t0 + Duration::from_secs(18)).is_some());
        assert!(store.get_at(&id, t0 + Duration::from_secs(28)).is_none());
        assert!(store.is_empty());
    }

    #[test]
    fn least_recently_used_is_evicted() {
        let store = SessionStore::new(Duration::from_secs(100), 2);
        let t0 = Instant::now();
        let a = store.insert_at(SessionData::default(), t0);
        let b = store.insert_at(SessionData::default(), t0 + Duration::from_secs(1));
        store.get_at(&a, t0 + Duration::from_secs(2));
        let c = store.insert_at(SessionData::default(), t0 + Duration::from_secs(3));
        let now = t0 + Duration::from_secs(4);
        assert!(store.get_at(&a, now).is_some());
        assert!(store.get_at(&b, now).is_none());
        assert!(store.get_at(&c, now).is_some());
    }
}

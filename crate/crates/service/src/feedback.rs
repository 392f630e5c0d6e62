//! Query sessions and user feedback, both persisted as append-only JSON
//! lines. Feedback is recorded for later analysis and never read by ranking.

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use cordsearch_core::search::QueryMode;

use crate::error::{Error, Result};

pub fn now_iso() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackKind {
    Click,
    Rating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rating {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub event_id: String,
    pub query_id: String,
    pub doc_id: String,
    pub kind: FeedbackKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<Rating>,
    /// 1-based position of the result when it was clicked or rated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    pub timestamp: String,
}

/// Body of `POST /feedback`. Clients should send their own `event_id` so
/// retries are idempotent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRequest {
    #[serde(default)]
    pub event_id: Option<String>,
    pub query_id: String,
    pub doc_id: String,
    pub kind: FeedbackKind,
    #[serde(default)]
    pub rating: Option<Rating>,
    #[serde(default)]
    pub rank: Option<usize>,
}

impl FeedbackRequest {
    pub fn validate(&self) -> std::result::Result<(), String> {
        match (self.kind, self.rating) {
            (FeedbackKind::Rating, None) => return Err("a rating event needs `rating`".into()),
            (FeedbackKind::Click, Some(_)) => return Err("a click event cannot carry `rating`".into()),
            _ => {}
        }
        if self.event_id.as_deref().is_some_and(|e| e.trim().is_empty()) {
            return Err("`event_id` is empty".into());
        }
        if self.rank == Some(0) {
            return Err("`rank` starts at 1".into());
        }
        if self.query_id.trim().is_empty() || self.doc_id.trim().is_empty() {
            return Err("`query_id` and `doc_id` must be non-empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySession {
    pub query_id: String,
    pub query: String,
    pub topic_filter: Vec<String>,
    pub mode: QueryMode,
    /// Returned documents in rank order.
    pub doc_ids: Vec<String>,
    pub timestamp: String,
}

/// An append-only JSON-lines file.
#[derive(Debug)]
pub struct JsonlLog {
    path: PathBuf,
    file: File,
}

impl JsonlLog {
    /// Open for appending and return every record already present. A torn
    /// last line (from a crash mid-write) is skipped and fenced off with a
    /// newline so later records stay parseable.
    pub fn open<T: DeserializeOwned>(path: &Path) -> Result<(Self, Vec<T>)> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::write(dir, e))?;
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .read(true)
            .open(path)
            .map_err(|e| Error::write(path, e))?;
        let mut records = Vec::new();
        for (n, line) in BufReader::new(&file).lines().enumerate() {
            let line = line.map_err(|e| Error::read(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line) {
                Ok(r) => records.push(r),
                Err(e) => log::warn!("{}: skipping unreadable line {}: {e}", path.display(), n + 1),
            }
        }
        let len = file.metadata().map_err(|e| Error::read(path, e))?.len();
        if len > 0 {
            let mut last = [0u8];
            file.seek(SeekFrom::Start(len - 1)).map_err(|e| Error::read(path, e))?;
            file.read_exact(&mut last).map_err(|e| Error::read(path, e))?;
            if last[0] != b'\n' {
                file.write_all(b"\n").map_err(|e| Error::write(path, e))?;
            }
        }
        Ok((
            Self {
                path: path.to_path_buf(),
                file,
            },
            records,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append<T: Serialize>(&mut self, record: &T) -> Result<()> {
        let mut line = serde_json::to_vec(record).map_err(|e| Error::internal(e.to_string()))?;
        line.push(b'\n');
        self.file.write_all(&line).map_err(|e| Error::write(&self.path, e))?;
        self.file.sync_data().map_err(|e| Error::write(&self.path, e))
    }
}

#[derive(Debug)]
pub struct SessionStore {
    log: JsonlLog,
    sessions: HashMap<String, QuerySession>,
}

impl SessionStore {
    pub fn open(path: &Path) -> Result<Self> {
        let (log, records) = JsonlLog::open::<QuerySession>(path)?;
        let sessions = records.into_iter().map(|s| (s.query_id.clone(), s)).collect();
        Ok(Self { log, sessions })
    }

    pub fn record(&mut self, session: QuerySession) -> Result<()> {
        if self.sessions.contains_key(&session.query_id) {
            return Err(Error::internal(format!("query_id {} issued twice", session.query_id)));
        }
        self.log.append(&session)?;
        self.sessions.insert(session.query_id.clone(), session);
        Ok(())
    }

    pub fn get(&self, query_id: &str) -> Option<&QuerySession> {
        self.sessions.get(query_id)
    }

    pub fn contains(&self, query_id: &str) -> bool {
        self.sessions.contains_key(query_id)
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recorded {
    New,
    /// The event id was already logged; nothing was written.
    Replay,
}

#[derive(Debug)]
pub struct FeedbackStore {
    log: JsonlLog,
    seen: HashSet<String>,
}

impl FeedbackStore {
    pub fn open(path: &Path) -> Result<Self> {
        let (log, records) = JsonlLog::open::<FeedbackEvent>(path)?;
        let seen = records.into_iter().map(|e| e.event_id).collect();
        Ok(Self { log, seen })
    }

    pub fn record(&mut self, event: FeedbackEvent) -> Result<Recorded> {
        if self.seen.contains(&event.event_id) {
            return Ok(Recorded::Replay);
        }
        self.log.append(&event)?;
        self.seen.insert(event.event_id);
        Ok(Recorded::New)
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

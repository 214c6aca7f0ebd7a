//! Per-session append-only JSONL event logs.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Session, SessionState, SessionTurn, ServiceError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created { session_id: String, created_ms: u64 },
    Turn { turn: SessionTurn },
    State { state: Box<SessionState> },
}

/// Writes one `{session_id}.jsonl` per session under `dir`; with no
/// directory, sessions live in memory only.
pub struct SessionLog {
    dir: Option<PathBuf>,
}

fn storage(e: impl std::fmt::Display) -> ServiceError {
    ServiceError::StorageFailure(e.to_string())
}

impl SessionLog {
    pub fn in_memory() -> Self {
        Self { dir: None }
    }

    /// Creates `dir` if needed and checks that it is writable.
    pub fn open(dir: &Path) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(dir).map_err(|e| storage(format!("{}: {e}", dir.display())))?;
        let probe = dir.join(".write-probe");
        File::create(&probe)
            .and_then(|_| std::fs::remove_file(&probe))
            .map_err(|e| storage(format!("{} is not writable: {e}", dir.display())))?;
        Ok(Self {
            dir: Some(dir.to_path_buf()),
        })
    }

    fn path(&self, session_id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{session_id}.jsonl")))
    }

    pub fn append(&self, session_id: &str, events: &[SessionEvent]) -> Result<(), ServiceError> {
        let Some(path) = self.path(session_id) else {
            return Ok(());
        };
        let mut buf = Vec::new();
        for e in events {
            serde_json::to_writer(&mut buf, e).map_err(storage)?;
            buf.push(b'\n');
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| storage(format!("{}: {e}", path.display())))?;
        f.write_all(&buf).map_err(storage)?;
        f.flush().map_err(storage)
    }

    /// Replays every session log in the directory, in file-name order.
    pub fn load_all(&self) -> Result<Vec<Session>, ServiceError> {
        let Some(dir) = &self.dir else {
            return Ok(Vec::new());
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(storage)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        paths.iter().map(|p| replay(p)).collect()
    }
}

fn replay(path: &Path) -> Result<Session, ServiceError> {
    let file = File::open(path).map_err(storage)?;
    let mut session: Option<Session> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(storage)?;
        if line.trim().is_empty() {
            continue;
        }
        let event: SessionEvent = match serde_json::from_str(&line) {
            Ok(e) => e,
            Err(e) => {
                // An interrupted final write leaves a partial line.
                log::warn!("{}:{}: skipping unreadable event: {e}", path.display(), i + 1);
                continue;
            }
        };
        match event {
            SessionEvent::Created {
                session_id,
                created_ms,
            } => session = Some(Session::new(session_id, created_ms)),
            SessionEvent::Turn { turn } => match session.as_mut() {
                Some(s) => s.turns.push(turn),
                None => return Err(storage(format!("{}: turn before creation", path.display()))),
            },
            SessionEvent::State { state } => match session.as_mut() {
                Some(s) => s.state = *state,
                None => return Err(storage(format!("{}: state before creation", path.display()))),
            },
        }
    }
    session.ok_or_else(|| storage(format!("{}: no creation event", path.display())))
}

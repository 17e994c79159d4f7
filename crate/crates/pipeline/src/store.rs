//! Line-delimited JSON storage: one record per line, each with its own
//! `schema_version`.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nlac_core::engine::ReplayBuffer;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::record::{TrainingPair, TransitionRecord, PAIR_SCHEMA_VERSION, TRANSITION_SCHEMA_VERSION};

/// Records read from a log, and how many truncated trailing lines were dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub skipped: usize,
}

fn read_jsonl<T: DeserializeOwned>(path: &Path, expected: u32) -> Result<Loaded<T>> {
    let text = std::fs::read_to_string(path)?;
    let complete = text.is_empty() || text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut records = Vec::with_capacity(lines.len());
    let mut skipped = 0;
    let schema = |line: usize, field: String, message: String| Error::Schema {
        path: path.to_path_buf(),
        line,
        field,
        message,
    };
    for (i, raw) in lines.iter().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value = match serde_json::from_str(raw) {
            Ok(v) => v,
            // a writer died mid-line
            Err(e) if !complete && line == lines.len() && (e.is_eof() || e.is_syntax()) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(schema(line, ".".into(), e.to_string())),
        };
        match value.get("schema_version").map(|v| v.as_u64()) {
            None => return Err(schema(line, "schema_version".into(), "missing field".into())),
            Some(Some(v)) if v == expected as u64 => {}
            Some(Some(found)) => {
                return Err(Error::SchemaVersion { path: path.to_path_buf(), line, found, expected });
            }
            Some(None) => return Err(schema(line, "schema_version".into(), "expected an unsigned integer".into())),
        }
        let record = serde_path_to_error::deserialize(value)
            .map_err(|e| schema(line, e.path().to_string(), e.inner().to_string()))?;
        records.push(record);
    }
    Ok(Loaded { records, skipped })
}

fn to_line<T: Serialize>(record: &T) -> Result<String> {
    let mut line = serde_json::to_string(record)?;
    line.push('\n');
    Ok(line)
}

/// Reads and validates a transition log. Keys must be unique.
pub fn load_transitions(path: &Path) -> Result<Loaded<TransitionRecord>> {
    let loaded: Loaded<TransitionRecord> = read_jsonl(path, TRANSITION_SCHEMA_VERSION)?;
    let mut keys = BTreeSet::new();
    for r in &loaded.records {
        r.validate()?;
        if !keys.insert(r.key()) {
            return Err(Error::Duplicate { episode_id: r.episode_id, step_index: r.step_index });
        }
    }
    Ok(loaded)
}

/// Builds a replay buffer from a transition log with the stored priorities.
/// With `capacity` below the log length the oldest records are evicted.
pub fn load_buffer(path: &Path, capacity: usize, alpha: f64) -> Result<(ReplayBuffer<TransitionRecord>, usize)> {
    let loaded = load_transitions(path)?;
    let mut buffer = ReplayBuffer::new(capacity, alpha)?;
    for r in loaded.records {
        let p = r.priority;
        buffer.push(r, p)?;
    }
    Ok((buffer, loaded.skipped))
}

/// Append-only transition log.
pub struct TransitionLog {
    path: PathBuf,
    file: File,
    keys: BTreeSet<(u64, u32)>,
}

impl TransitionLog {
    /// Opens or creates the log, indexing the keys already in it.
    pub fn open(path: &Path) -> Result<Self> {
        let keys = if path.exists() {
            load_transitions(path)?.records.iter().map(TransitionRecord::key).collect()
        } else {
            BTreeSet::new()
        };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { path: path.to_path_buf(), file, keys })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Validates and appends one record, flushed before returning.
    pub fn persist(&mut self, record: &TransitionRecord) -> Result<()> {
        record.validate()?;
        if self.keys.contains(&record.key()) {
            return Err(Error::Duplicate { episode_id: record.episode_id, step_index: record.step_index });
        }
        self.file.write_all(to_line(record)?.as_bytes())?;
        self.file.flush()?;
        self.keys.insert(record.key());
        Ok(())
    }
}

/// Writes records to `path`, replacing it.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        out.write_all(to_line(r)?.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// The exact bytes [`write_jsonl`] writes.
pub fn to_jsonl<T: Serialize>(records: &[T]) -> Result<String> {
    records.iter().map(to_line).collect()
}

pub fn load_pairs(path: &Path) -> Result<Loaded<TrainingPair>> {
    read_jsonl(path, PAIR_SCHEMA_VERSION)
}

/// A critic loss reported back by the trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorityUpdate {
    pub episode_id: u64,
    pub step_index: u32,
    pub priority: f64,
}

/// Sets each named transition's priority. Unknown keys are an error.
pub fn apply_priorities(records: &mut [TransitionRecord], updates: &[PriorityUpdate]) -> Result<()> {
    for u in updates {
        if !(u.priority >= 0.0 && u.priority.is_finite()) {
            return Err(Error::Invalid(format!("priority {} must be finite and ≥ 0", u.priority)));
        }
        let r = records
            .iter_mut()
            .find(|r| r.key() == (u.episode_id, u.step_index))
            .ok_or_else(|| Error::Invalid(format!("no transition (episode {}, step {})", u.episode_id, u.step_index)))?;
        r.priority = u.priority;
    }
    Ok(())
}

/// Reads priority updates, one JSON object per line.
pub fn load_priority_updates(path: &Path) -> Result<Vec<PriorityUpdate>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let mut de = serde_json::Deserializer::from_str(raw);
        out.push(serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            line: i + 1,
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?);
    }
    Ok(out)
}

//! Append-only JSON-lines log of reviewer decisions, replayed on startup.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Decision {
    #[serde(alias = "accept")]
    Accept,
    #[serde(alias = "reject")]
    Reject,
    #[serde(alias = "flag")]
    Flag,
}

/// What a client submits; the server stamps `created_at`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewAdjudication {
    pub standard_ref: usize,
    pub spec_ref: usize,
    pub decision: Decision,
    #[serde(default)]
    pub note: String,
    pub reviewer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationRecord {
    pub standard_ref: usize,
    pub spec_ref: usize,
    pub decision: Decision,
    pub note: String,
    pub reviewer: String,
    pub created_at: DateTime<Utc>,
}

impl AdjudicationRecord {
    fn key(&self) -> (usize, usize, &str) {
        (self.standard_ref, self.spec_ref, self.reviewer.as_str())
    }
}

/// The log file plus its replayed contents. Callers serialize access (one writer).
pub struct AdjudicationStore {
    path: PathBuf,
    file: File,
    records: Vec<AdjudicationRecord>,
}

impl AdjudicationStore {
    /// Opens (creating if needed) and replays the log at `path`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .read(true)
            .open(&path)
            .with_context(|| format!("opening adjudication log {}", path.display()))?;
        let mut records = Vec::new();
        for (n, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: AdjudicationRecord = serde_json::from_str(&line).with_context(|| {
                format!("corrupt adjudication log {} at line {}", path.display(), n + 1)
            })?;
            records.push(rec);
        }
        Ok(Self {
            path,
            file,
            records,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends and syncs one record before acknowledging it.
    pub fn append(&mut self, record: AdjudicationRecord) -> Result<AdjudicationRecord> {
        if record.reviewer.trim().is_empty() {
            bail!("reviewer is empty");
        }
        let mut line = serde_json::to_string(&record)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        self.records.push(record.clone());
        Ok(record)
    }

    /// Every record in write order.
    pub fn history(&self) -> &[AdjudicationRecord] {
        &self.records
    }

    /// The latest record per (standard, spec, reviewer), ordered by that key.
    pub fn latest(&self) -> Vec<AdjudicationRecord> {
        let mut map: BTreeMap<(usize, usize, &str), &AdjudicationRecord> = BTreeMap::new();
        for r in &self.records {
            map.insert(r.key(), r);
        }
        map.into_values().cloned().collect()
    }
}

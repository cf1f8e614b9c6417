//! Append-only JSON Lines store of trial records.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::protocol::record::{TrialRecord, TRIAL_SCHEMA};

/// One run's JSONL store: each line is a `trial/1` record, appended as the
/// trial completes and flushed immediately.
#[derive(Debug, Clone)]
pub struct RunStore {
    path: PathBuf,
}

impl RunStore {
    /// Starts a fresh store, truncating any existing file at the path.
    pub fn create(path: impl Into<PathBuf>) -> Result<RunStore> {
        let path = path.into();
        fs::write(&path, b"").map_err(|e| Error::io(&path, e))?;
        Ok(RunStore { path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &TrialRecord) -> Result<()> {
        let line = serde_json::to_string(record).expect("trial record serializes");
        let mut file = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        file.write_all(line.as_bytes())
            .and_then(|_| file.write_all(b"\n"))
            .and_then(|_| file.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    /// Reads every record back, validating the schema tag per line.
    pub fn read(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: TrialRecord = serde_json::from_str(line)
                .map_err(|e| Error::format(path, idx + 1, e.to_string()))?;
            if record.schema != TRIAL_SCHEMA {
                return Err(Error::format(
                    path,
                    idx + 1,
                    format!("unsupported schema {:?}", record.schema),
                ));
            }
            records.push(record);
        }
        Ok(records)
    }
}

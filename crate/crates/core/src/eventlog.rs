//! Append-only JSON-lines event log.
//!
//! Each line is one object `{"id": n, ...record fields}`; ids start at 1 and
//! increase by one per append. Any number of readers may call [`read_log`];
//! at most one [`EventLog`] writer holds a given file, enforced by an advisory
//! lock on the sidecar file `<log>.lock`.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EventLogError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: already locked by another writer", path.display())]
    Locked { path: PathBuf },
    #[error("{}:{line}: {reason}", path.display())]
    Corrupt { path: PathBuf, line: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry<T> {
    pub id: u64,
    #[serde(flatten)]
    pub record: T,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> EventLogError + '_ {
    move |source| EventLogError::Io { path: path.to_path_buf(), source }
}

pub fn lock_path(log: &Path) -> PathBuf {
    let mut s = log.as_os_str().to_owned();
    s.push(".lock");
    PathBuf::from(s)
}

/// Reads every entry, checking that ids run 1, 2, 3, ...
/// A missing file reads as an empty log.
pub fn read_log<T: DeserializeOwned>(path: &Path) -> Result<Vec<Entry<T>>, EventLogError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut out: Vec<Entry<T>> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |reason: String| EventLogError::Corrupt { path: path.to_path_buf(), line: i + 1, reason };
        let entry: Entry<T> = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        let expected = out.len() as u64 + 1;
        if entry.id != expected {
            return Err(corrupt(format!("expected id {expected}, found {}", entry.id)));
        }
        out.push(entry);
    }
    Ok(out)
}

/// Single writer over one log file. The lock is released on drop.
#[derive(Debug)]
pub struct EventLog<T> {
    path: PathBuf,
    file: File,
    _lock: File,
    next_id: u64,
    _record: PhantomData<fn(T)>,
}

impl<T: Serialize + DeserializeOwned> EventLog<T> {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, EventLogError> {
        let path = path.into();
        let lpath = lock_path(&path);
        let lock = OpenOptions::new().create(true).write(true).truncate(false).open(&lpath).map_err(io_err(&lpath))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(fs::TryLockError::WouldBlock) => return Err(EventLogError::Locked { path }),
            Err(fs::TryLockError::Error(e)) => return Err(io_err(&lpath)(e)),
        }
        let existing = read_log::<T>(&path)?;
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        Ok(EventLog { path, file, _lock: lock, next_id: existing.len() as u64 + 1, _record: PhantomData })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one line and flushes it; returns the record id.
    pub fn append(&mut self, record: &T) -> Result<u64, EventLogError> {
        let id = self.next_id;
        let entry = Entry { id, record };
        let mut line = serde_json::to_string(&entry).map_err(|e| EventLogError::Corrupt {
            path: self.path.clone(),
            line: id as usize,
            reason: e.to_string(),
        })?;
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        self.file.flush().map_err(io_err(&self.path))?;
        self.next_id += 1;
        Ok(id)
    }

    pub fn read_back(&self) -> Result<Vec<Entry<T>>, EventLogError> {
        read_log(&self.path)
    }
}

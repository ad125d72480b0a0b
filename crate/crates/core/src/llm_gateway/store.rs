//! Append-only JSON-lines store of exchanges, doubling as the response cache.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{CacheKey, GatewayError, LlmExchange};

struct Inner {
    entries: HashMap<CacheKey, LlmExchange>,
    file: Option<File>,
}

pub struct ExchangeStore {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

fn store_err(path: &Path, e: impl std::fmt::Display) -> GatewayError {
    GatewayError::Store(format!("{}: {e}", path.display()))
}

impl ExchangeStore {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            inner: Mutex::new(Inner {
                entries: HashMap::new(),
                file: None,
            }),
        }
    }

    /// Opens (creating if needed) a store file and loads existing entries.
    /// A torn final line from an interrupted write is skipped.
    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(|e| store_err(path, e))?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| store_err(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<LlmExchange>(&line) {
                    Ok(ex) => {
                        entries.entry(ex.key()).or_insert(ex);
                    }
                    Err(e) => log::warn!("{}:{}: skipping unreadable exchange: {e}", path.display(), i + 1),
                }
            }
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| store_err(path, e))?;
        let existing = std::fs::read(path).map_err(|e| store_err(path, e))?;
        if existing.last().is_some_and(|&b| b != b'\n') {
            file.write_all(b"\n").map_err(|e| store_err(path, e))?;
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            inner: Mutex::new(Inner {
                entries,
                file: Some(file),
            }),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &CacheKey) -> Option<LlmExchange> {
        self.inner.lock().unwrap().entries.get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stores `exchange` unless its key is present; returns the entry that
    /// ends up in the store.
    pub fn insert(&self, exchange: LlmExchange) -> Result<LlmExchange, GatewayError> {
        let mut inner = self.inner.lock().unwrap();
        let key = exchange.key();
        if let Some(existing) = inner.entries.get(&key) {
            return Ok(existing.clone());
        }
        if let Some(file) = inner.file.as_mut() {
            let path = self.path.as_deref().unwrap_or(Path::new("<store>"));
            let mut line = serde_json::to_string(&exchange).map_err(|e| store_err(path, e))?;
            line.push('\n');
            file.write_all(line.as_bytes()).map_err(|e| store_err(path, e))?;
            file.flush().map_err(|e| store_err(path, e))?;
        }
        inner.entries.insert(key, exchange.clone());
        Ok(exchange)
    }
}

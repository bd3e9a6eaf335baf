use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ExtensionListing, MarketError};
use crate::package::sha256_hex;

pub const BLOB_DIR: &str = "store";
pub const LEDGER_FILE: &str = "ledger.jsonl";
pub const LISTINGS_FILE: &str = "listings.json";

/// One completed download.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub id: String,
    pub version: String,
    pub sha256: String,
    pub size: u64,
}

impl LedgerEntry {
    pub fn key(&self) -> String {
        format!("{}@{}", self.id, self.version)
    }
}

/// Content-addressed package store.
///
/// ```text
/// <root>/store/<first two hex digits>/<sha256>.vsix
/// <root>/ledger.jsonl      one LedgerEntry per line, append-only
/// <root>/listings.json     latest known listing per extension, sorted by id
/// ```
pub struct Store {
    root: PathBuf,
    ledger: Mutex<()>,
}

fn io_err(path: &Path, e: std::io::Error) -> MarketError {
    MarketError::Store { path: path.display().to_string(), message: e.to_string() }
}

impl Store {
    /// Opens or creates a store. Leftover temporary files from an
    /// interrupted write are removed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, MarketError> {
        let root = root.into();
        let blobs = root.join(BLOB_DIR);
        fs::create_dir_all(&blobs).map_err(|e| io_err(&blobs, e))?;
        for shard in fs::read_dir(&blobs).map_err(|e| io_err(&blobs, e))?.flatten() {
            if let Ok(files) = fs::read_dir(shard.path()) {
                for f in files.flatten() {
                    if f.path().extension().is_some_and(|x| x == "tmp") {
                        let _ = fs::remove_file(f.path());
                    }
                }
            }
        }
        Ok(Self { root, ledger: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn blob_path(&self, sha256: &str) -> PathBuf {
        self.root.join(BLOB_DIR).join(&sha256[..2.min(sha256.len())]).join(format!("{sha256}.vsix"))
    }

    /// Stores `bytes` under their hash. Returns the hash and whether the
    /// blob was already present.
    pub fn put(&self, bytes: &[u8]) -> Result<(String, bool), MarketError> {
        let sha = sha256_hex(bytes);
        let path = self.blob_path(&sha);
        if let Ok(existing) = fs::read(&path) {
            if sha256_hex(&existing) == sha {
                return Ok((sha, true));
            }
        }
        let dir = path.parent().unwrap_or(&self.root);
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let tmp = path.with_extension(format!("{}.tmp", std::process::id()));
        fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;
        Ok((sha, false))
    }

    pub fn get(&self, sha256: &str) -> Result<Vec<u8>, MarketError> {
        let path = self.blob_path(sha256);
        fs::read(&path).map_err(|e| io_err(&path, e))
    }

    /// Appends entries as whole lines under a lock.
    pub fn append(&self, entries: &[LedgerEntry]) -> Result<(), MarketError> {
        if entries.is_empty() {
            return Ok(());
        }
        let _guard = self.ledger.lock().unwrap_or_else(|e| e.into_inner());
        let path = self.root.join(LEDGER_FILE);
        let mut text = String::new();
        for e in entries {
            text.push_str(&serde_json::to_string(e).map_err(|e| MarketError::Config(e.to_string()))?);
            text.push('\n');
        }
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| io_err(&path, e))?;
        f.write_all(text.as_bytes()).and_then(|_| f.sync_data()).map_err(|e| io_err(&path, e))
    }

    /// Ledger entries in append order. A torn final line is ignored.
    pub fn entries(&self) -> Result<Vec<LedgerEntry>, MarketError> {
        let path = self.root.join(LEDGER_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(&path, e)),
        };
        Ok(text.lines().filter_map(|l| serde_json::from_str(l).ok()).collect())
    }

    /// `id@version` keys already downloaded, with their blob hash.
    pub fn completed(&self) -> Result<BTreeMap<String, String>, MarketError> {
        Ok(self.entries()?.into_iter().map(|e| (e.key(), e.sha256)).collect())
    }

    pub fn listings(&self) -> Result<Vec<ExtensionListing>, MarketError> {
        let path = self.root.join(LISTINGS_FILE);
        match fs::read_to_string(&path) {
            Ok(t) => serde_json::from_str(&t).map_err(|e| MarketError::Store { path: path.display().to_string(), message: e.to_string() }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(io_err(&path, e)),
        }
    }

    /// Merges `fresh` into the listing snapshot; a fresh listing replaces an
    /// older one with the same id.
    pub fn merge_listings(&self, fresh: &[ExtensionListing]) -> Result<(), MarketError> {
        let mut by_id: BTreeMap<String, ExtensionListing> =
            self.listings()?.into_iter().map(|l| (l.identity.canonical_id(), l)).collect();
        for l in fresh {
            by_id.insert(l.identity.canonical_id(), l.clone());
        }
        let all: Vec<&ExtensionListing> = by_id.values().collect();
        let path = self.root.join(LISTINGS_FILE);
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(&all).map_err(|e| MarketError::Config(e.to_string()))?;
        fs::write(&tmp, text + "\n").map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))
    }

    /// Every stored blob hash.
    pub fn blobs(&self) -> Result<BTreeSet<String>, MarketError> {
        let dir = self.root.join(BLOB_DIR);
        let mut out = BTreeSet::new();
        for shard in fs::read_dir(&dir).map_err(|e| io_err(&dir, e))?.flatten() {
            for f in fs::read_dir(shard.path()).map_err(|e| io_err(&shard.path(), e))?.flatten() {
                let p = f.path();
                if p.extension().is_some_and(|x| x == "vsix") {
                    if let Some(stem) = p.file_stem() {
                        out.insert(stem.to_string_lossy().into_owned());
                    }
                }
            }
        }
        Ok(out)
    }
}

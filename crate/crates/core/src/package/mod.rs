//! Reading `.vsix` archives into [`ExtensionPackage`] values.

mod kind;
mod manifest;
mod path;

use std::io::{self, Cursor, Read};

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::finding::{Finding, Location, RuleId};
use crate::identity::ExtensionIdentity;

pub use kind::{classify_entry, EntryKind};
pub use manifest::{ExtensionManifest, ManifestParseError, UntrustedSupport};
pub use path::normalize_entry_path;

/// Conventional location of the extension manifest inside a `.vsix`.
pub const MANIFEST_PATH: &str = "extension/package.json";

pub const DEFAULT_HASH_LIMIT: u64 = 64 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("input is not a ZIP archive")]
    NotAZip,
    #[error("archive is corrupt: {0}")]
    Corrupt(String),
    #[error("archive has no extension manifest")]
    ManifestMissing,
    #[error("manifest `{path}` is unparseable: {reason}")]
    ManifestUnparseable { path: String, reason: String },
    #[error("entry `{0}` escapes the archive root")]
    PathTraversal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventoryEntry {
    pub path: String,
    pub size: u64,
    pub kind: EntryKind,
    pub sha256: String,
    /// Set when only the first [`ReaderOptions::hash_limit`] bytes were hashed.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub hash_truncated: bool,
}

/// A `node_modules` package shipped inside the archive, as declared by its
/// own `package.json`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BundledModule {
    pub name: String,
    pub version: String,
    pub manifest_path: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageInventory {
    pub entries: Vec<InventoryEntry>,
    pub total_size: u64,
    #[serde(default)]
    pub bundled_modules: Vec<BundledModule>,
}

impl PackageInventory {
    pub fn from_entries(mut entries: Vec<InventoryEntry>) -> Self {
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        let total_size = entries.iter().map(|e| e.size).sum();
        Self {
            entries,
            total_size,
            bundled_modules: Vec::new(),
        }
    }
}

/// An ECMAScript entry retained for source scanning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    /// Path relative to the extension root (the manifest's directory).
    pub path: String,
    pub size: u64,
    /// `None` when the entry was larger than the retention limit.
    pub bytes: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionPackage {
    pub identity: ExtensionIdentity,
    pub manifest: ExtensionManifest,
    pub inventory: PackageInventory,
    pub package_sha256: String,
    pub manifest_path: String,
    pub sources: Vec<SourceFile>,
    /// Findings raised while reading, e.g. identity mismatches.
    pub findings: Vec<Finding>,
}

#[derive(Debug, Clone)]
pub struct ReaderOptions {
    pub hash_limit: u64,
    /// ECMAScript entries larger than this are inventoried without content.
    pub source_retain_limit: u64,
}

impl Default for ReaderOptions {
    fn default() -> Self {
        Self {
            hash_limit: DEFAULT_HASH_LIMIT,
            source_retain_limit: DEFAULT_HASH_LIMIT,
        }
    }
}

pub fn read_package(archive_bytes: &[u8]) -> Result<ExtensionPackage, ReadError> {
    read_package_with(archive_bytes, &ReaderOptions::default())
}

struct RawEntry {
    path: String,
    entry: InventoryEntry,
    content: Option<Vec<u8>>,
}

pub fn read_package_with(archive_bytes: &[u8], opts: &ReaderOptions) -> Result<ExtensionPackage, ReadError> {
    if !archive_bytes.starts_with(b"PK") {
        return Err(ReadError::NotAZip);
    }
    let mut archive = zip::ZipArchive::new(Cursor::new(archive_bytes)).map_err(|e| match e {
        zip::result::ZipError::InvalidArchive(_) if !has_eocd(archive_bytes) => ReadError::NotAZip,
        other => ReadError::Corrupt(other.to_string()),
    })?;

    let mut raw = Vec::with_capacity(archive.len());
    for i in 0..archive.len() {
        let mut file = archive
            .by_index(i)
            .map_err(|e| ReadError::Corrupt(e.to_string()))?;
        let name = file.name().to_string();
        let path = normalize_entry_path(&name).ok_or_else(|| ReadError::PathTraversal(name.clone()))?;
        if file.is_dir() || path.is_empty() {
            continue;
        }
        raw.push(read_entry(&mut file, path, opts).map_err(|e| ReadError::Corrupt(format!("{name}: {e}")))?);
    }
    raw.sort_by(|a, b| a.path.cmp(&b.path));
    raw.dedup_by(|a, b| a.path == b.path);

    let manifest_idx = locate_manifest(&raw).ok_or(ReadError::ManifestMissing)?;
    let manifest_path = raw[manifest_idx].path.clone();
    let manifest_text = raw[manifest_idx]
        .content
        .as_deref()
        .map(|b| String::from_utf8_lossy(b).into_owned())
        .unwrap_or_default();
    let manifest = ExtensionManifest::parse(&manifest_text).map_err(|e| ReadError::ManifestUnparseable {
        path: manifest_path.clone(),
        reason: e.0,
    })?;
    raw[manifest_idx].entry.kind = EntryKind::Manifest;

    let root = match manifest_path.rfind('/') {
        Some(i) => &manifest_path[..=i],
        None => "",
    };

    let archive_identity = raw
        .iter()
        .find(|r| r.path == "extension.vsixmanifest")
        .and_then(|r| r.content.as_deref())
        .and_then(|b| vsixmanifest_identity(&String::from_utf8_lossy(b)));

    let manifest_has_identity = manifest.raw.get("publisher").is_some() && manifest.raw.get("name").is_some();
    let identity = match (&archive_identity, manifest_has_identity) {
        (_, true) => manifest.identity.clone(),
        (Some(a), false) => a.clone(),
        (None, false) => manifest.identity.clone(),
    };

    let mut findings = Vec::new();
    if let (Some(a), true) = (&archive_identity, manifest_has_identity) {
        let m = &manifest.identity;
        if a.publisher != m.publisher || a.name != m.name || a.version != m.version {
            findings.push(
                Finding::new(
                    RuleId::PkgIdMismatch,
                    &identity,
                    format!("archive declares {a}, manifest declares {m}"),
                )
                .at(Location::file("extension.vsixmanifest")),
            );
        }
    }

    let mut bundled_modules = Vec::new();
    let mut sources = Vec::new();
    let mut entries = Vec::with_capacity(raw.len());
    for r in raw {
        if r.entry.kind == EntryKind::NodeModule && r.path.ends_with("/package.json") {
            if let Some(m) = r.content.as_deref().and_then(|b| bundled_module(&r.path, b)) {
                bundled_modules.push(m);
            }
        }
        if r.entry.kind == EntryKind::EcmascriptSource {
            let rel = r.path.strip_prefix(root).unwrap_or(&r.path).to_string();
            sources.push(SourceFile {
                path: rel,
                size: r.entry.size,
                bytes: r.content,
            });
        }
        entries.push(r.entry);
    }
    bundled_modules.sort();

    let mut inventory = PackageInventory::from_entries(entries);
    inventory.bundled_modules = bundled_modules;

    Ok(ExtensionPackage {
        identity,
        manifest,
        inventory,
        package_sha256: sha256_hex(archive_bytes),
        manifest_path,
        sources,
        findings,
    })
}

fn has_eocd(bytes: &[u8]) -> bool {
    bytes.windows(4).rev().take(65_557).any(|w| w == b"PK\x05\x06")
}

fn read_entry<R: Read>(file: &mut R, path: String, opts: &ReaderOptions) -> io::Result<RawEntry> {
    let mut head = Vec::new();
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 64 * 1024];
    let mut size: u64 = 0;
    let mut hashed: u64 = 0;
    // Content is only kept for entries we may need later.
    let lower = path.to_ascii_lowercase();
    let wants_content = lower.ends_with(".js")
        || lower.ends_with(".cjs")
        || lower.ends_with(".mjs")
        || lower.ends_with("package.json")
        || lower.ends_with(".vsixmanifest");
    let mut content = Vec::new();
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        let chunk = &buf[..n];
        if head.len() < 8 {
            head.extend_from_slice(&chunk[..chunk.len().min(8 - head.len())]);
        }
        if hashed < opts.hash_limit {
            let take = (opts.hash_limit - hashed).min(n as u64) as usize;
            hasher.update(&chunk[..take]);
            hashed += take as u64;
        }
        if wants_content && size + (n as u64) <= opts.source_retain_limit {
            content.extend_from_slice(chunk);
        }
        size += n as u64;
    }
    let kind = classify_entry(&path, &head);
    let keep = wants_content && size <= opts.source_retain_limit;
    Ok(RawEntry {
        entry: InventoryEntry {
            path: path.clone(),
            size,
            kind,
            sha256: hex::encode(hasher.finalize()),
            hash_truncated: size > opts.hash_limit,
        },
        path,
        content: keep.then_some(content),
    })
}

fn locate_manifest(entries: &[RawEntry]) -> Option<usize> {
    entries.iter().position(|e| e.path == MANIFEST_PATH).or_else(|| {
        entries.iter().position(|e| {
            let mut parts = e.path.split('/');
            matches!((parts.next(), parts.next(), parts.next()), (Some(_), Some("package.json"), None))
        })
    })
}

fn vsixmanifest_identity(xml: &str) -> Option<ExtensionIdentity> {
    static TAG: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    static ATTR: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    let tag = TAG.get_or_init(|| Regex::new(r"<Identity\b[^>]*>").unwrap());
    let attr = ATTR.get_or_init(|| Regex::new(r#"\b(Id|Version|Publisher)\s*=\s*"([^"]*)""#).unwrap());
    let tag = tag.find(xml)?.as_str();
    let (mut id, mut version, mut publisher) = (None, None, None);
    for cap in attr.captures_iter(tag) {
        let value = cap[2].to_string();
        match &cap[1] {
            "Id" => id = Some(value),
            "Version" => version = Some(value),
            _ => publisher = Some(value),
        }
    }
    ExtensionIdentity::new(&publisher?, &id?, version.as_deref().unwrap_or("0.0.0")).ok()
}

fn bundled_module(path: &str, bytes: &[u8]) -> Option<BundledModule> {
    // Only the package's own manifest: node_modules/<name>/package.json or
    // node_modules/@scope/<name>/package.json.
    let idx = path.rfind("node_modules/")?;
    let rest = &path[idx + "node_modules/".len()..];
    let depth = rest.matches('/').count();
    let scoped = rest.starts_with('@');
    if (scoped && depth != 2) || (!scoped && depth != 1) {
        return None;
    }
    let v: serde_json::Value = serde_json::from_slice(bytes).ok()?;
    Some(BundledModule {
        name: v.get("name")?.as_str()?.to_string(),
        version: v.get("version")?.as_str()?.to_string(),
        manifest_path: path.to_string(),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

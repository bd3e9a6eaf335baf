use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryKind {
    EcmascriptSource,
    Manifest,
    NodeModule,
    NativeExecutable,
    Archive,
    Media,
    Other,
}

const NATIVE_SUFFIXES: &[&str] = &[".exe", ".dll", ".so", ".dylib"];
const ARCHIVE_SUFFIXES: &[&str] = &[
    ".jar", ".zip", ".tar", ".tar.gz", ".tgz", ".gz", ".7z", ".rar", ".vsix", ".xz", ".bz2",
];
const MEDIA_SUFFIXES: &[&str] = &[
    ".png", ".jpg", ".jpeg", ".gif", ".svg", ".ico", ".webp", ".bmp", ".ttf", ".otf", ".woff",
    ".woff2", ".eot", ".mp3", ".mp4", ".wav", ".webm",
];
const SOURCE_SUFFIXES: &[&str] = &[".js", ".cjs", ".mjs"];

fn magic_kind(head: &[u8]) -> Option<EntryKind> {
    const NATIVE: &[&[u8]] = &[
        b"MZ",
        b"\x7fELF",
        &[0xfe, 0xed, 0xfa, 0xce],
        &[0xfe, 0xed, 0xfa, 0xcf],
        &[0xce, 0xfa, 0xed, 0xfe],
        &[0xcf, 0xfa, 0xed, 0xfe],
        &[0xca, 0xfe, 0xba, 0xbe],
    ];
    const ARCHIVE: &[&[u8]] = &[
        b"PK\x03\x04",
        b"PK\x05\x06",
        &[0x1f, 0x8b],
        b"7z\xbc\xaf\x27\x1c",
        b"Rar!\x1a\x07",
        &[0xfd, b'7', b'z', b'X', b'Z', 0x00],
        b"BZh",
    ];
    if NATIVE.iter().any(|m| head.starts_with(m)) {
        return Some(EntryKind::NativeExecutable);
    }
    if ARCHIVE.iter().any(|m| head.starts_with(m)) {
        return Some(EntryKind::Archive);
    }
    None
}

/// Assigns an inventory kind from the entry path and its leading bytes.
///
/// Magic bytes win over the file suffix, then any `node_modules` path
/// component, then the suffix table. Total: unknown entries are `Other`.
pub fn classify_entry(path: &str, head_bytes: &[u8]) -> EntryKind {
    if let Some(kind) = magic_kind(head_bytes) {
        return kind;
    }
    let lower = path.to_ascii_lowercase();
    if lower.split('/').any(|c| c == "node_modules") {
        return EntryKind::NodeModule;
    }
    let file_name = lower.rsplit('/').next().unwrap_or(&lower);
    let depth = lower.matches('/').count();
    if (file_name == "package.json" && depth <= 1) || file_name == "extension.vsixmanifest" {
        return EntryKind::Manifest;
    }
    let has = |suffixes: &[&str]| suffixes.iter().any(|s| file_name.ends_with(s));
    if has(SOURCE_SUFFIXES) {
        EntryKind::EcmascriptSource
    } else if has(NATIVE_SUFFIXES) {
        EntryKind::NativeExecutable
    } else if has(ARCHIVE_SUFFIXES) {
        EntryKind::Archive
    } else if has(MEDIA_SUFFIXES) {
        EntryKind::Media
    } else {
        EntryKind::Other
    }
}

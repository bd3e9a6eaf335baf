//! In-memory `.vsix` archives.

use std::io::{Cursor, Write};

use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, ZipWriter};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Content {
    Bytes(Vec<u8>),
    /// `len` bytes starting with `head`, zero-filled after it.
    Filled { head: Vec<u8>, len: u64 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VsixBuilder {
    entries: Vec<(String, Content)>,
}

impl VsixBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry at an archive path, verbatim.
    pub fn entry(mut self, path: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        self.entries.push((path.into(), Content::Bytes(bytes.into())));
        self
    }

    /// Adds `extension/<path>`.
    pub fn file(self, path: &str, bytes: impl Into<Vec<u8>>) -> Self {
        self.entry(format!("extension/{path}"), bytes)
    }

    pub fn manifest(self, manifest: &serde_json::Value) -> Self {
        let text = serde_json::to_string_pretty(manifest).expect("json value");
        self.file("package.json", text)
    }

    /// A large entry of `len` bytes, mostly zeros; cheap to build and
    /// compresses to almost nothing.
    pub fn filled(mut self, path: &str, head: &[u8], len: u64) -> Self {
        self.entries.push((format!("extension/{path}"), Content::Filled { head: head.to_vec(), len }));
        self
    }

    pub fn build(&self) -> Vec<u8> {
        let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
        let opts = SimpleFileOptions::default()
            .compression_method(CompressionMethod::Deflated)
            .last_modified_time(zip::DateTime::default());
        for (path, content) in &self.entries {
            match content {
                Content::Bytes(b) => {
                    zip.start_file(path.as_str(), opts).expect("zip entry");
                    zip.write_all(b).expect("zip write");
                }
                Content::Filled { head, len } => {
                    zip.start_file(path.as_str(), opts.large_file(*len >= u32::MAX as u64)).expect("zip entry");
                    zip.write_all(head).expect("zip write");
                    let chunk = vec![0u8; 1 << 20];
                    let mut left = len.saturating_sub(head.len() as u64);
                    while left > 0 {
                        let n = left.min(chunk.len() as u64) as usize;
                        zip.write_all(&chunk[..n]).expect("zip write");
                        left -= n as u64;
                    }
                }
            }
        }
        zip.finish().expect("zip finish").into_inner()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Read;

    #[test]
    fn entries_round_trip() {
        let bytes = VsixBuilder::new().file("a.txt", "hi").filled("big.bin", b"MZ", 3 << 20).build();
        assert!(bytes.len() < 64 * 1024);
        let mut z = zip::ZipArchive::new(Cursor::new(bytes)).unwrap();
        let mut s = String::new();
        z.by_name("extension/a.txt").unwrap().read_to_string(&mut s).unwrap();
        assert_eq!(s, "hi");
        let mut big = Vec::new();
        z.by_name("extension/big.bin").unwrap().read_to_end(&mut big).unwrap();
        assert_eq!(big.len(), 3 << 20);
        assert_eq!(&big[..3], b"MZ\0");
    }

    #[test]
    fn builds_are_byte_stable() {
        let b = || VsixBuilder::new().file("x.js", "1").build();
        assert_eq!(b(), b());
    }
}

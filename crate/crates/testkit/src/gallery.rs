//! An in-process marketplace gallery serving the fixture-server protocol.
//!
//! Routes (all GET):
//! - `/listings?page=P&pageSize=S&since=T` returns `{"items": [...], "total": N}`
//!   with listings ordered by id, pages starting at 1, and `since` (Unix
//!   seconds, optional) keeping listings updated strictly after it.
//! - `/extensions/<publisher>/<name>` returns `{"items": [item]}`.
//! - `/download/<publisher>/<name>/<version>` returns the package bytes.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GalleryVersion {
    pub version: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GalleryListing {
    pub publisher: String,
    pub name: String,
    pub display_name: String,
    pub installs: u64,
    pub verified: bool,
    pub published: u64,
    pub updated: u64,
    /// Oldest first, as published.
    pub versions: Vec<GalleryVersion>,
}

impl GalleryListing {
    pub fn id(&self) -> String {
        format!("{}.{}", self.publisher, self.name)
    }

    pub fn latest(&self) -> &GalleryVersion {
        self.versions.last().expect("listing without versions")
    }

    fn item(&self) -> Value {
        json!({
            "publisher": {"publisherName": self.publisher, "isVerified": self.verified},
            "extensionName": self.name,
            "displayName": self.display_name,
            "installCount": self.installs,
            "publishedDate": self.published,
            "lastUpdated": self.updated,
            "versions": self.versions.iter().map(|v| json!({"version": v.version})).collect::<Vec<_>>(),
        })
    }
}

pub type PackageBytes = dyn Fn(&str, &str, &str) -> Vec<u8> + Send + Sync;

/// Default package contents: small, distinct per id and version.
pub fn plain_bytes(publisher: &str, name: &str, version: &str) -> Vec<u8> {
    format!("fixture package {publisher}.{name}@{version}\n").into_bytes()
}

#[derive(Default)]
pub struct FixtureGallery {
    listings: Mutex<BTreeMap<String, GalleryListing>>,
    fail_next: AtomicUsize,
    requests: AtomicUsize,
}

impl FixtureGallery {
    pub fn new(listings: impl IntoIterator<Item = GalleryListing>) -> Self {
        let g = Self::default();
        g.listings.lock().unwrap().extend(listings.into_iter().map(|l| (l.id(), l)));
        g
    }

    /// `n` listings updated at or before `t0`; roughly a third carry more
    /// than one version.
    pub fn seeded(seed: u64, n: usize, t0: u64, bytes: &PackageBytes) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let listings = (0..n).map(|i| {
            let publisher = format!("pub{}", i % 37);
            let name = format!("ext{i:04}");
            let count = if rng.gen_bool(0.33) { rng.gen_range(2..5) } else { 1 };
            let versions = (0..count)
                .map(|k| {
                    let version = format!("1.{k}.{}", rng.gen_range(0..3));
                    GalleryVersion { bytes: bytes(&publisher, &name, &version), version }
                })
                .collect();
            let published = t0 - rng.gen_range(100_000..1_000_000);
            GalleryListing {
                display_name: format!("Extension {i}"),
                installs: rng.gen_range(0..2_000_000),
                verified: rng.gen_bool(0.2),
                published,
                updated: rng.gen_range(published..=t0),
                versions,
                publisher,
                name,
            }
        });
        Self::new(listings.collect::<Vec<_>>())
    }

    /// Adds `added` new listings and a new version to `updated` existing
    /// ones, all stamped `at`. Returns the ids touched.
    pub fn mutate(&self, seed: u64, added: usize, updated: usize, at: u64, bytes: &PackageBytes) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut map = self.listings.lock().unwrap();
        let mut touched = Vec::new();
        let ids: Vec<String> = map.keys().cloned().collect();
        for _ in 0..updated.min(ids.len()) {
            let id = &ids[rng.gen_range(0..ids.len())];
            let l = map.get_mut(id).unwrap();
            if l.updated == at {
                continue;
            }
            let version = format!("2.{}.0", l.versions.len());
            l.versions.push(GalleryVersion { bytes: bytes(&l.publisher, &l.name, &version), version });
            l.updated = at;
            touched.push(id.clone());
        }
        for i in 0..added {
            let (publisher, name) = (format!("newpub{}", i % 5), format!("fresh{seed}x{i:03}"));
            let version = "0.1.0".to_string();
            let l = GalleryListing {
                display_name: format!("Fresh {i}"),
                installs: rng.gen_range(0..1000),
                verified: false,
                published: at,
                updated: at,
                versions: vec![GalleryVersion { bytes: bytes(&publisher, &name, &version), version }],
                publisher,
                name,
            };
            touched.push(l.id());
            map.insert(l.id(), l);
        }
        touched.sort();
        touched
    }

    pub fn listings(&self) -> Vec<GalleryListing> {
        self.listings.lock().unwrap().values().cloned().collect()
    }

    /// The next `n` requests answer 503.
    pub fn fail_next(&self, n: usize) {
        self.fail_next.store(n, Ordering::SeqCst);
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Answers one request: status, content type and body.
    pub fn handle(&self, method: &str, target: &str) -> (u16, &'static str, Vec<u8>) {
        self.requests.fetch_add(1, Ordering::SeqCst);
        if self.fail_next.fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1)).is_ok() {
            return (503, "text/plain", b"unavailable".to_vec());
        }
        if method != "GET" {
            return (405, "text/plain", Vec::new());
        }
        let (path, query) = target.split_once('?').unwrap_or((target, ""));
        let params: BTreeMap<&str, &str> = query.split('&').filter_map(|kv| kv.split_once('=')).collect();
        let segs: Vec<&str> = path.trim_matches('/').split('/').collect();
        let map = self.listings.lock().unwrap();
        let find = |p: &str, n: &str| map.get(&format!("{p}.{n}"));
        let json_ok = |v: Value| (200, "application/json", serde_json::to_vec(&v).unwrap());
        match segs.as_slice() {
            ["listings"] => {
                let num = |k: &str| params.get(k).filter(|v| !v.is_empty()).map(|v| v.parse::<u64>());
                let (Some(Ok(page)), Some(Ok(size))) = (num("page"), num("pageSize")) else {
                    return (400, "text/plain", b"page and pageSize required".to_vec());
                };
                let since = match num("since") {
                    Some(Ok(s)) => Some(s),
                    Some(Err(_)) => return (400, "text/plain", b"bad since".to_vec()),
                    None => None,
                };
                let matching: Vec<&GalleryListing> = map.values().filter(|l| since.is_none_or(|s| l.updated > s)).collect();
                let start = (page.max(1) - 1).saturating_mul(size) as usize;
                let items: Vec<Value> = matching.iter().skip(start).take(size as usize).map(|l| l.item()).collect();
                json_ok(json!({"items": items, "total": matching.len()}))
            }
            ["extensions", p, n] => match find(p, n) {
                Some(l) => json_ok(json!({"items": [l.item()]})),
                None => (404, "text/plain", Vec::new()),
            },
            ["download", p, n, v] => match find(p, n).and_then(|l| l.versions.iter().find(|x| x.version == *v)) {
                Some(x) => (200, "application/octet-stream", x.bytes.clone()),
                None => (404, "text/plain", Vec::new()),
            },
            _ => (404, "text/plain", Vec::new()),
        }
    }

    /// Serves the gallery over HTTP on a loopback port until the process
    /// exits. Returns the base URL.
    pub fn serve(self: &Arc<Self>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let base = format!("http://{}", listener.local_addr().unwrap());
        let me = Arc::clone(self);
        std::thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let me = Arc::clone(&me);
                std::thread::spawn(move || {
                    let mut reader = BufReader::new(&stream);
                    let mut line = String::new();
                    if reader.read_line(&mut line).is_err() {
                        return;
                    }
                    let mut parts = line.split_whitespace();
                    let (method, target) = (parts.next().unwrap_or(""), parts.next().unwrap_or("/"));
                    let mut length = 0usize;
                    loop {
                        let mut h = String::new();
                        if reader.read_line(&mut h).unwrap_or(0) == 0 || h.trim().is_empty() {
                            break;
                        }
                        if let Some((k, v)) = h.split_once(':') {
                            if k.eq_ignore_ascii_case("content-length") {
                                length = v.trim().parse().unwrap_or(0);
                            }
                        }
                    }
                    let mut body = vec![0; length];
                    let _ = reader.read_exact(&mut body);
                    let (status, ctype, payload) = me.handle(method, target);
                    let head = format!(
                        "HTTP/1.1 {status} X\r\nContent-Type: {ctype}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                        payload.len()
                    );
                    let mut out = &stream;
                    let _ = out.write_all(head.as_bytes()).and_then(|_| out.write_all(&payload));
                });
            }
        });
        base
    }
}

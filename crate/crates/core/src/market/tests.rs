use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use serde_json::json;
use vsixscan_testkit::gallery::{plain_bytes, FixtureGallery, GalleryListing, GalleryVersion};

use super::*;
use crate::clock::SimClock;

const T0: u64 = 1_700_000_000;
const BASE: &str = "http://gallery.test";

struct Local(Arc<FixtureGallery>);

impl Transport for Local {
    fn send(&self, request: &Request) -> Result<Response, String> {
        let target = request.url.strip_prefix(BASE).ok_or("unknown host")?;
        let method = match request.method {
            Method::Get => "GET",
            Method::Post => "POST",
        };
        let (status, _, body) = self.0.handle(method, target);
        Ok(Response { status, body, retry_after_ms: None })
    }
}

struct Canned(Vec<u8>);

impl Transport for Canned {
    fn send(&self, _: &Request) -> Result<Response, String> {
        Ok(Response { status: 200, body: self.0.clone(), retry_after_ms: None })
    }
}

fn config() -> MarketConfig {
    MarketConfig { rate_per_second: 0, workers: 4, page_size: 20, initial_backoff_ms: 100, ..Default::default() }
}

fn client_with(gallery: &Arc<FixtureGallery>, config: MarketConfig, clock: Arc<SimClock>) -> MarketClient {
    MarketClient::with_parts(EndpointProfile::fixture_server(BASE), config, Arc::new(Local(gallery.clone())), clock)
}

fn client(gallery: &Arc<FixtureGallery>) -> MarketClient {
    client_with(gallery, config(), Arc::new(SimClock::starting_at(T0 * 1000)))
}

fn listing(publisher: &str, name: &str, versions: &[&str]) -> GalleryListing {
    GalleryListing {
        publisher: publisher.into(),
        name: name.into(),
        display_name: name.into(),
        installs: 10,
        verified: false,
        published: T0 - 10,
        updated: T0 - 5,
        versions: versions
            .iter()
            .map(|v| GalleryVersion { version: v.to_string(), bytes: plain_bytes(publisher, name, v) })
            .collect(),
    }
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn three_listings_paginate_as_two_then_one() {
    let g = Arc::new(FixtureGallery::seeded(3, 3, T0, &plain_bytes));
    let c = client(&g);
    let sizes: Vec<usize> = (1..=3)
        .map(|page| c.query_listings(&ListingFilter { updated_since: None, page, page_size: 2 }).unwrap().listings.len())
        .collect();
    assert_eq!(sizes, [2, 1, 0]);
    let later = c.query_listings(&ListingFilter { updated_since: Some(T0 + 1), page: 1, page_size: 2 }).unwrap();
    assert!(later.listings.is_empty());
}

#[test]
fn versions_are_newest_first() {
    let g = Arc::new(FixtureGallery::new([listing("a", "two", &["1.0.0", "1.1.0"]), listing("a", "one", &["0.3.0"])]));
    let c = client(&g);
    let id = |n: &str| ExtensionIdentity::new("a", n, "").unwrap();
    assert_eq!(c.fetch_versions(&id("two")).unwrap(), ["1.1.0", "1.0.0"]);
    assert_eq!(c.fetch_versions(&id("one")).unwrap(), ["0.3.0"]);
    assert_eq!(c.fetch_versions(&id("zero")), Err(MarketError::NotFound("a.zero".into())));
    assert_eq!(sort_versions_desc(vec!["1.10.0".into(), "1.9.0".into(), "1.10.0-rc.1".into(), "latest".into()]), [
        "1.10.0",
        "1.10.0-rc.1",
        "1.9.0",
        "latest"
    ]);
}

#[test]
fn prior_version_candidates() {
    let g = Arc::new(FixtureGallery::new([
        listing("p", "a", &["1.0.0"]),
        listing("p", "b", &["1.0.0", "1.0.1"]),
        listing("p", "c", &["2.0.0"]),
        listing("p", "d", &["0.1.0", "0.2.0", "0.3.0"]),
        listing("p", "e", &["5.0.0"]),
    ]));
    let listings = client(&g).all_listings(None).unwrap();
    let prior = prior_versions(&listings);
    let got: Vec<(String, Vec<String>)> = prior.into_iter().map(|(id, v)| (id.canonical_id(), v)).collect();
    assert_eq!(got, vec![("p.b".to_string(), vec!["1.0.0".to_string()]), ("p.d".into(), vec!["0.2.0".into(), "0.1.0".into()])]);
}

#[test]
fn download_is_content_addressed_and_idempotent() {
    let g = Arc::new(FixtureGallery::new([listing("p", "x", &["1.0.0"])]));
    let c = client(&g);
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let id = ExtensionIdentity::new("p", "x", "1.0.0").unwrap();
    let first = c.download(&id, &store, None).unwrap();
    assert!(!first.cache_hit);
    let requests = g.request_count();
    let second = c.download(&id, &store, None).unwrap();
    assert!(second.cache_hit);
    assert_eq!(g.request_count(), requests);
    assert_eq!(second.sha256, first.sha256);
    assert_eq!(store.blobs().unwrap().len(), 1);
    assert_eq!(store.entries().unwrap().len(), 1);

    let path = store.blob_path(&first.sha256);
    assert!(path.starts_with(dir.path().join(BLOB_DIR).join(&first.sha256[..2])));
    let out = Command::new("sha256sum").arg(&path).output().expect("sha256sum available");
    let external = String::from_utf8(out.stdout).unwrap();
    assert_eq!(external.split_whitespace().next(), Some(first.sha256.as_str()));

    let missing = ExtensionIdentity::new("p", "gone", "1.0.0").unwrap();
    assert!(matches!(c.download(&missing, &store, None), Err(MarketError::NotFound(_))));
    let other = ExtensionIdentity::new("p", "x", "9.9.9").unwrap();
    assert!(matches!(c.download(&other, &store, None), Err(MarketError::NotFound(_))));
}

#[test]
fn expected_hash_is_enforced() {
    let g = Arc::new(FixtureGallery::new([listing("p", "x", &["1.0.0"])]));
    let c = client(&g);
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let id = ExtensionIdentity::new("p", "x", "1.0.0").unwrap();
    let err = c.download(&id, &store, Some(&"0".repeat(64))).unwrap_err();
    assert!(matches!(err, MarketError::IntegrityMismatch { .. }));
    assert!(store.blobs().unwrap().is_empty());
    let good = sha256_hex(&plain_bytes("p", "x", "1.0.0"));
    assert_eq!(c.download(&id, &store, Some(&good.to_uppercase())).unwrap().sha256, good);
}

#[test]
fn unavailable_endpoint_is_retried_with_backoff() {
    let g = Arc::new(FixtureGallery::seeded(1, 2, T0, &plain_bytes));
    let clock = Arc::new(SimClock::starting_at(0));
    let c = client_with(&g, config(), clock.clone());
    g.fail_next(2);
    let page = c.query_listings(&ListingFilter { updated_since: None, page: 1, page_size: 5 }).unwrap();
    assert_eq!(page.listings.len(), 2);
    assert_eq!(clock.now_ms(), 100 + 200);
    g.fail_next(100);
    let err = c.query_listings(&ListingFilter { updated_since: None, page: 1, page_size: 5 }).unwrap_err();
    assert!(matches!(err, MarketError::EndpointUnavailable { attempts: 4, .. }), "{err:?}");
}

#[test]
fn schema_mismatches_are_reported() {
    let profile = EndpointProfile::fixture_server(BASE);
    let clock = Arc::new(SimClock::default());
    let with = |body: serde_json::Value| {
        let c = MarketClient::with_parts(profile.clone(), config(), Arc::new(Canned(serde_json::to_vec(&body).unwrap())), clock.clone());
        c.query_listings(&ListingFilter { updated_since: None, page: 1, page_size: 5 })
    };
    assert!(matches!(with(json!({"results": []})), Err(MarketError::SchemaMismatch { .. })));
    let no_name = json!({"items": [{"publisher": {"publisherName": "p"}, "versions": [{"version": "1.0.0"}]}]});
    assert!(matches!(with(no_name), Err(MarketError::SchemaMismatch { .. })));
    let no_versions = json!({"items": [{"publisher": {"publisherName": "p"}, "extensionName": "n", "versions": []}]});
    assert!(matches!(with(no_versions), Err(MarketError::SchemaMismatch { .. })));
    let minimal = json!({"items": [{"publisher": {"publisherName": "P"}, "extensionName": "N", "versions": [{"version": "1.0.0"}]}]});
    let page = with(minimal).unwrap();
    assert_eq!(page.listings[0].identity.to_string(), "p.n@1.0.0");
    assert_eq!(page.listings[0].install_count, 0);
}

#[test]
fn public_gallery_response_shape() {
    let body = json!({"results": [{"extensions": [{
        "publisher": {"publisherName": "ChrisMarti", "isDomainVerified": true},
        "extensionName": "regex",
        "displayName": "Regex Previewer",
        "publishedDate": "2016-03-09T21:17:42.607Z",
        "lastUpdated": "2021-05-01T10:00:00Z",
        "versions": [{"version": "0.3.0"}, {"version": "0.4.0"}],
        "statistics": [{"statisticName": "averagerating", "value": 4.5}, {"statisticName": "install", "value": 1234567.0}]
    }]}]});
    let c = MarketClient::with_parts(
        EndpointProfile::public_gallery(),
        config(),
        Arc::new(Canned(serde_json::to_vec(&body).unwrap())),
        Arc::new(SimClock::default()),
    );
    let page = c.query_listings(&ListingFilter { updated_since: None, page: 1, page_size: 50 }).unwrap();
    let l = &page.listings[0];
    assert_eq!(l.identity.to_string(), "chrismarti.regex@0.4.0");
    assert_eq!((l.install_count, l.publisher_verified), (1_234_567, true));
    assert_eq!((l.published_at, l.updated_at), (1_457_558_262, 1_619_863_200));
    assert_eq!(l.versions, ["0.4.0", "0.3.0"]);
    assert_eq!(l.listing_url, "https://marketplace.visualstudio.com/items?itemName=chrismarti.regex");
}

#[test]
fn crawl_matches_the_gallery_ledger() {
    let g = Arc::new(FixtureGallery::seeded(250, 250, T0, &plain_bytes));
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let report = client(&g).crawl(&store, &CrawlOptions::default()).unwrap();
    let want: BTreeSet<(String, String)> = g.listings().iter().map(|l| (l.id(), l.latest().version.clone())).collect();
    let got: BTreeSet<(String, String)> = report.listings.iter().map(|l| (l.identity.canonical_id(), l.identity.version.clone())).collect();
    assert_eq!(got, want);
    assert_eq!((report.downloaded, report.failed.len(), report.interrupted), (250, 0, false));
    let stored: BTreeSet<(String, String)> = store.entries().unwrap().into_iter().map(|e| (e.id, e.version)).collect();
    assert_eq!(stored, want);
    for sha in store.blobs().unwrap() {
        assert_eq!(sha256_hex(&store.get(&sha).unwrap()), sha);
    }
    let again = client(&g).crawl(&store, &CrawlOptions::default()).unwrap();
    assert_eq!((again.downloaded, again.already_stored), (0, 250));
}

#[test]
fn interrupted_crawl_resumes_to_identical_store() {
    let g = Arc::new(FixtureGallery::seeded(7, 60, T0, &plain_bytes));
    let opts = CrawlOptions { all_versions: true, ..Default::default() };
    let full = tempfile::tempdir().unwrap();
    client(&g).crawl(&Store::open(full.path()).unwrap(), &opts).unwrap();

    let resumed = tempfile::tempdir().unwrap();
    for cut in [13, 29] {
        let r = client(&g).crawl(&Store::open(resumed.path()).unwrap(), &CrawlOptions { max_downloads: Some(cut), ..opts.clone() }).unwrap();
        assert!(r.interrupted);
        assert_eq!(r.downloaded, cut);
    }
    let shard = resumed.path().join(BLOB_DIR).join("ab");
    std::fs::create_dir_all(&shard).unwrap();
    std::fs::write(shard.join("junk.tmp"), b"torn").unwrap();
    let last = client(&g).crawl(&Store::open(resumed.path()).unwrap(), &opts).unwrap();
    assert!(!last.interrupted);
    assert_eq!(last.already_stored, 42);
    assert_eq!(tree(resumed.path()), tree(full.path()));
}

#[test]
fn crawl_respects_requests_per_second() {
    let g = Arc::new(FixtureGallery::seeded(11, 40, T0, &plain_bytes));
    let clock = Arc::new(SimClock::starting_at(0));
    let c = client_with(&g, MarketConfig { rate_per_second: 5, workers: 6, page_size: 10, ..config() }, clock);
    let dir = tempfile::tempdir().unwrap();
    c.crawl(&Store::open(dir.path()).unwrap(), &CrawlOptions { all_versions: true, ..Default::default() }).unwrap();
    let times = c.request_times();
    assert!(times.len() > 40);
    assert!(times.windows(6).all(|w| w[5] - w[0] >= 1000), "more than 5 requests inside one second");
}

#[test]
fn incremental_crawl_is_complete() {
    let g = Arc::new(FixtureGallery::seeded(21, 120, T0, &plain_bytes));
    let inc = tempfile::tempdir().unwrap();
    client(&g).crawl(&Store::open(inc.path()).unwrap(), &CrawlOptions::default()).unwrap();
    let touched = g.mutate(5, 15, 20, T0 + 3600, &plain_bytes);
    assert!(touched.len() >= 15);
    let r = client(&g).crawl(&Store::open(inc.path()).unwrap(), &CrawlOptions { updated_since: Some(T0), ..Default::default() }).unwrap();
    let seen: Vec<String> = r.listings.iter().map(|l| l.identity.canonical_id()).collect();
    assert_eq!(seen, touched);

    let full = tempfile::tempdir().unwrap();
    client(&g).crawl(&Store::open(full.path()).unwrap(), &CrawlOptions::default()).unwrap();
    let (a, b) = (Store::open(inc.path()).unwrap(), Store::open(full.path()).unwrap());
    assert_eq!(a.listings().unwrap(), b.listings().unwrap());
    let inc_entries: BTreeSet<LedgerEntry> = a.entries().unwrap().into_iter().collect();
    assert!(b.entries().unwrap().iter().all(|e| inc_entries.contains(e)));
}

#[test]
fn crawl_over_http() {
    let g = Arc::new(FixtureGallery::seeded(2, 5, T0, &plain_bytes));
    let base = g.serve();
    let c = MarketClient::new(EndpointProfile::fixture_server(&base), MarketConfig { rate_per_second: 0, page_size: 2, ..Default::default() });
    let dir = tempfile::tempdir().unwrap();
    let r = c.crawl(&Store::open(dir.path()).unwrap(), &CrawlOptions::default()).unwrap();
    assert_eq!((r.listings.len(), r.downloaded), (5, 5));
    assert!(matches!(c.lookup("nobody", "nothing"), Err(MarketError::NotFound(_))));
}

//! Marketplace gallery client: listing queries, package downloads into a
//! content-addressed store, and resumable crawls.

mod profile;
mod store;
mod transport;

use std::cmp::Ordering as CmpOrdering;
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use profile::{
    json_escape, render, select, url_escape, EndpointProfile, FieldPaths, Method, RequestTemplate, FIXTURE_SERVER,
    PUBLIC_GALLERY,
};
pub use store::{LedgerEntry, Store, BLOB_DIR, LEDGER_FILE, LISTINGS_FILE};
pub use transport::{HttpTransport, Request, Response, Transport, MAX_BODY};

use crate::clock::{Clock, RateLimiter, SystemClock};
use crate::deps::parse_version;
use crate::identity::ExtensionIdentity;
use crate::package::sha256_hex;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarketError {
    #[error("endpoint {url} unavailable after {attempts} attempt(s): {message}")]
    EndpointUnavailable { url: String, message: String, attempts: u32 },
    #[error("response from {url} does not match the profile: {message}")]
    SchemaMismatch { url: String, message: String },
    #[error("{0} not found in the gallery")]
    NotFound(String),
    #[error("{identity}: expected sha256 {expected}, got {actual}")]
    IntegrityMismatch { identity: String, expected: String, actual: String },
    #[error("store {path}: {message}")]
    Store { path: String, message: String },
    #[error("endpoint configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionListing {
    /// Version is the newest listed version.
    pub identity: ExtensionIdentity,
    pub display_name: String,
    pub install_count: u64,
    pub publisher_verified: bool,
    /// Seconds since the Unix epoch; 0 when the gallery omits it.
    pub published_at: u64,
    pub updated_at: u64,
    /// Newest first; never empty.
    pub versions: Vec<String>,
    pub listing_url: String,
}

impl ExtensionListing {
    pub fn at_version(&self, version: &str) -> ExtensionIdentity {
        ExtensionIdentity { version: version.to_string(), ..self.identity.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListingFilter {
    pub updated_since: Option<u64>,
    /// Starts at 1.
    pub page: u32,
    pub page_size: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListingPage {
    pub page: u32,
    pub listings: Vec<ExtensionListing>,
    /// Items the gallery returned before `updated_since` filtering.
    pub returned: usize,
}

/// Sorts newest first by semantic version. Strings that are not versions
/// follow, in reverse lexical order. Duplicates are dropped.
pub fn sort_versions_desc(mut versions: Vec<String>) -> Vec<String> {
    versions.sort_by(|a, b| match (parse_version(a), parse_version(b)) {
        (Ok(x), Ok(y)) => y.cmp(&x).then_with(|| b.cmp(a)),
        (Ok(_), Err(_)) => CmpOrdering::Less,
        (Err(_), Ok(_)) => CmpOrdering::Greater,
        (Err(_), Err(_)) => b.cmp(a),
    });
    versions.dedup();
    versions
}

/// Extensions with at least one version older than the newest, paired with
/// those older versions.
pub fn prior_versions(listings: &[ExtensionListing]) -> Vec<(ExtensionIdentity, Vec<String>)> {
    listings
        .iter()
        .filter(|l| l.versions.len() > 1)
        .map(|l| (l.identity.clone(), l.versions[1..].to_vec()))
        .collect()
}

fn timestamp(v: &Value) -> Option<u64> {
    match v {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.trim().parse::<u64>().ok().or_else(|| {
            time::OffsetDateTime::parse(s.trim(), &time::format_description::well_known::Rfc3339)
                .ok()
                .map(|t| t.unix_timestamp().max(0) as u64)
        }),
        _ => None,
    }
}

/// Unix seconds or an RFC 3339 date-time.
pub fn parse_timestamp(s: &str) -> Option<u64> {
    timestamp(&Value::String(s.to_string()))
}

fn count(v: &Value) -> Option<u64> {
    v.as_u64().or_else(|| v.as_f64().filter(|f| *f >= 0.0).map(|f| f as u64)).or_else(|| v.as_str()?.trim().parse().ok())
}

fn parse_listing(item: &Value, profile: &EndpointProfile, url: &str) -> Result<ExtensionListing, MarketError> {
    let f = &profile.fields;
    let mismatch = |message: String| MarketError::SchemaMismatch { url: url.to_string(), message };
    let first = |path: &str| select(item, path).into_iter().next();
    let text = |path: &str, field: &str| {
        first(path)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| mismatch(format!("missing string field `{field}` at `{path}`")))
    };
    let publisher = text(&f.publisher, "publisher")?;
    let name = text(&f.name, "name")?;
    let versions: Vec<String> = select(item, &f.versions).into_iter().filter_map(Value::as_str).map(str::to_string).collect();
    let versions = sort_versions_desc(versions);
    let Some(latest) = versions.first() else {
        return Err(mismatch(format!("listing {publisher}.{name} has no versions at `{}`", f.versions)));
    };
    let identity = ExtensionIdentity::new(&publisher, &name, latest).map_err(|e| mismatch(e.to_string()))?;
    let vars = [("publisher", identity.publisher.as_str()), ("name", identity.name.as_str())];
    Ok(ExtensionListing {
        display_name: first(&f.display_name).and_then(Value::as_str).unwrap_or(&name).to_string(),
        install_count: first(&f.install_count).and_then(count).unwrap_or(0),
        publisher_verified: first(&f.verified).and_then(Value::as_bool).unwrap_or(false),
        published_at: first(&f.published_at).and_then(timestamp).unwrap_or(0),
        updated_at: first(&f.updated_at).and_then(timestamp).unwrap_or(0),
        listing_url: render(&profile.listing_url, &vars, url_escape),
        identity,
        versions,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketConfig {
    /// Maximum requests per second; 0 for no limit.
    pub rate_per_second: u32,
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub workers: usize,
    pub page_size: u32,
    pub timeout_secs: u64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self { rate_per_second: 2, max_attempts: 4, initial_backoff_ms: 1_000, workers: 4, page_size: 100, timeout_secs: 60 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Download {
    pub identity: ExtensionIdentity,
    pub sha256: String,
    pub size: u64,
    pub cache_hit: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CrawlOptions {
    pub updated_since: Option<u64>,
    /// Download every listed version, not only the newest.
    pub all_versions: bool,
    /// Stop after this many new downloads.
    pub max_downloads: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CrawlReport {
    pub listings: Vec<ExtensionListing>,
    pub downloaded: usize,
    pub already_stored: usize,
    pub failed: Vec<(String, String)>,
    /// True when `max_downloads` cut the crawl short.
    pub interrupted: bool,
}

pub struct MarketClient {
    profile: EndpointProfile,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    limiter: RateLimiter,
    config: MarketConfig,
    log: Mutex<Vec<u64>>,
}

impl MarketClient {
    pub fn new(profile: EndpointProfile, config: MarketConfig) -> Self {
        let transport = Arc::new(HttpTransport::new(config.timeout_secs));
        Self::with_parts(profile, config, transport, Arc::new(SystemClock))
    }

    pub fn with_parts(profile: EndpointProfile, config: MarketConfig, transport: Arc<dyn Transport>, clock: Arc<dyn Clock>) -> Self {
        Self {
            limiter: RateLimiter::per_second(config.rate_per_second, clock.clone()),
            profile,
            transport,
            clock,
            config,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn profile(&self) -> &EndpointProfile {
        &self.profile
    }

    /// Admission time (ms) of every request sent, in order of admission.
    pub fn request_times(&self) -> Vec<u64> {
        let mut v = self.log.lock().unwrap_or_else(|e| e.into_inner()).clone();
        v.sort_unstable();
        v
    }

    fn build(&self, t: &RequestTemplate, vars: &[(&str, &str)]) -> Request {
        Request {
            method: t.method,
            url: render(&t.url, vars, url_escape),
            body: t.body.as_ref().map(|b| render(b, vars, json_escape)),
            headers: t.headers.clone(),
        }
    }

    fn send(&self, req: &Request, what: &str) -> Result<Vec<u8>, MarketError> {
        let attempts = self.config.max_attempts.max(1);
        let mut backoff = self.config.initial_backoff_ms;
        let mut message = String::new();
        for attempt in 1..=attempts {
            let admitted = self.limiter.acquire();
            self.log.lock().unwrap_or_else(|e| e.into_inner()).push(admitted);
            let mut wait = backoff;
            match self.transport.send(req) {
                Ok(r) if (200..300).contains(&r.status) => return Ok(r.body),
                Ok(r) if r.status == 404 => return Err(MarketError::NotFound(what.to_string())),
                Ok(r) if r.status == 429 || r.status >= 500 => {
                    message = format!("HTTP {}", r.status);
                    wait = wait.max(r.retry_after_ms.unwrap_or(0));
                }
                Ok(r) => {
                    return Err(MarketError::EndpointUnavailable { url: req.url.clone(), message: format!("HTTP {}", r.status), attempts: attempt })
                }
                Err(e) => message = e,
            }
            if attempt < attempts {
                self.clock.sleep_ms(wait);
                backoff = backoff.saturating_mul(2);
            }
        }
        Err(MarketError::EndpointUnavailable { url: req.url.clone(), message, attempts })
    }

    fn listings_from(&self, body: &[u8], url: &str) -> Result<Vec<ExtensionListing>, MarketError> {
        let mismatch = |message: String| MarketError::SchemaMismatch { url: url.to_string(), message };
        let doc: Value = serde_json::from_slice(body).map_err(|e| mismatch(format!("not JSON: {e}")))?;
        let items = select(&doc, &self.profile.fields.items);
        let Some(Value::Array(items)) = items.first() else {
            return Err(mismatch(format!("no listing array at `{}`", self.profile.fields.items)));
        };
        items.iter().map(|item| parse_listing(item, &self.profile, url)).collect()
    }

    pub fn query_listings(&self, filter: &ListingFilter) -> Result<ListingPage, MarketError> {
        let page = filter.page.max(1).to_string();
        let size = filter.page_size.max(1).to_string();
        let since = filter.updated_since.map(|s| s.to_string()).unwrap_or_default();
        let req = self.build(&self.profile.query, &[("page", &page), ("page_size", &size), ("since", &since)]);
        let body = self.send(&req, &format!("listing page {page}"))?;
        let all = self.listings_from(&body, &req.url)?;
        let returned = all.len();
        let listings = all.into_iter().filter(|l| filter.updated_since.is_none_or(|s| l.updated_at > s)).collect();
        Ok(ListingPage { page: filter.page.max(1), listings, returned })
    }

    pub fn lookup(&self, publisher: &str, name: &str) -> Result<ExtensionListing, MarketError> {
        let id = format!("{publisher}.{name}").to_ascii_lowercase();
        let req = self.build(&self.profile.lookup, &[("publisher", publisher), ("name", name)]);
        let body = self.send(&req, &id)?;
        self.listings_from(&body, &req.url)?
            .into_iter()
            .find(|l| l.identity.canonical_id() == id)
            .ok_or(MarketError::NotFound(id))
    }

    /// All listed versions, newest first.
    pub fn fetch_versions(&self, identity: &ExtensionIdentity) -> Result<Vec<String>, MarketError> {
        Ok(self.lookup(&identity.publisher, &identity.name)?.versions)
    }

    fn fetch_blob(&self, identity: &ExtensionIdentity, store: &Store, expected: Option<&str>) -> Result<Download, MarketError> {
        let vars = [("publisher", identity.publisher.as_str()), ("name", identity.name.as_str()), ("version", identity.version.as_str())];
        let req = self.build(&self.profile.download, &vars);
        let bytes = self.send(&req, &identity.to_string())?;
        let actual = sha256_hex(&bytes);
        if bytes.is_empty() {
            return Err(MarketError::IntegrityMismatch { identity: identity.to_string(), expected: "non-empty package".into(), actual: "empty body".into() });
        }
        if let Some(want) = expected.filter(|w| !w.eq_ignore_ascii_case(&actual)) {
            return Err(MarketError::IntegrityMismatch { identity: identity.to_string(), expected: want.to_string(), actual });
        }
        let (sha256, _) = store.put(&bytes)?;
        Ok(Download { identity: identity.clone(), sha256, size: bytes.len() as u64, cache_hit: false })
    }

    fn stored(&self, identity: &ExtensionIdentity, store: &Store) -> Result<Option<Download>, MarketError> {
        let key = format!("{}@{}", identity.canonical_id(), identity.version);
        let Some(entry) = store.entries()?.into_iter().rev().find(|e| e.key() == key) else {
            return Ok(None);
        };
        Ok(store.blob_path(&entry.sha256).is_file().then(|| Download {
            identity: identity.clone(),
            sha256: entry.sha256,
            size: entry.size,
            cache_hit: true,
        }))
    }

    /// Downloads one version into the store. A version already recorded in
    /// the ledger is not fetched again.
    pub fn download(&self, identity: &ExtensionIdentity, store: &Store, expected_sha256: Option<&str>) -> Result<Download, MarketError> {
        if let Some(hit) = self.stored(identity, store)? {
            if let Some(want) = expected_sha256.filter(|w| !w.eq_ignore_ascii_case(&hit.sha256)) {
                return Err(MarketError::IntegrityMismatch { identity: identity.to_string(), expected: want.to_string(), actual: hit.sha256 });
            }
            return Ok(hit);
        }
        let d = self.fetch_blob(identity, store, expected_sha256)?;
        store.append(&[entry_for(&d)])?;
        Ok(d)
    }

    /// Every listing page, optionally limited to listings updated after
    /// `since`. Later duplicates of an id replace earlier ones.
    pub fn all_listings(&self, since: Option<u64>) -> Result<Vec<ExtensionListing>, MarketError> {
        let page_size = self.config.page_size.max(1);
        let mut by_id = BTreeMap::new();
        for page in 1.. {
            let p = self.query_listings(&ListingFilter { updated_since: since, page, page_size })?;
            let stale_page = self.profile.newest_first && since.is_some() && p.listings.len() < p.returned;
            for l in p.listings {
                by_id.insert(l.identity.canonical_id(), l);
            }
            if p.returned < page_size as usize || stale_page {
                break;
            }
        }
        Ok(by_id.into_values().collect())
    }

    /// Lists the gallery and downloads whatever the store's ledger lacks.
    ///
    /// Work is ordered by id and version and handled in rounds of at most
    /// `workers` parallel downloads; each round's ledger lines are appended
    /// in work order, so an interrupted crawl resumed later leaves the same
    /// store as an uninterrupted one.
    pub fn crawl(&self, store: &Store, opts: &CrawlOptions) -> Result<CrawlReport, MarketError> {
        let listings = self.all_listings(opts.updated_since)?;
        store.merge_listings(&listings)?;
        let done = store.completed()?;
        let mut work: Vec<ExtensionIdentity> = listings
            .iter()
            .flat_map(|l| {
                let versions = if opts.all_versions { &l.versions[..] } else { &l.versions[..1] };
                versions.iter().map(|v| l.at_version(v))
            })
            .collect();
        work.sort();
        let mut report = CrawlReport { listings, ..Default::default() };
        let pending: Vec<ExtensionIdentity> = work
            .into_iter()
            .filter(|id| {
                let hit = done.get(&format!("{}@{}", id.canonical_id(), id.version)).is_some_and(|sha| store.blob_path(sha).is_file());
                report.already_stored += usize::from(hit);
                !hit
            })
            .collect();
        let workers = self.config.workers.max(1);
        let mut rest = &pending[..];
        while !rest.is_empty() {
            let budget = opts.max_downloads.map_or(usize::MAX, |m| m.saturating_sub(report.downloaded));
            if budget == 0 {
                report.interrupted = true;
                break;
            }
            let (round, tail) = rest.split_at(workers.min(budget).min(rest.len()));
            rest = tail;
            let results: Vec<Result<Download, MarketError>> = std::thread::scope(|s| {
                let handles: Vec<_> = round.iter().map(|id| s.spawn(move || self.fetch_blob(id, store, None))).collect();
                handles.into_iter().map(|h| h.join().expect("download worker panicked")).collect()
            });
            let mut entries = Vec::new();
            for (id, r) in round.iter().zip(results) {
                match r {
                    Ok(d) => {
                        entries.push(entry_for(&d));
                        report.downloaded += 1;
                    }
                    Err(e) => report.failed.push((id.to_string(), e.to_string())),
                }
            }
            store.append(&entries)?;
        }
        Ok(report)
    }
}

fn entry_for(d: &Download) -> LedgerEntry {
    LedgerEntry { id: d.identity.canonical_id(), version: d.identity.version.clone(), sha256: d.sha256.clone(), size: d.size }
}

#[cfg(test)]
mod tests;

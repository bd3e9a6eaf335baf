//! Threat-intelligence lookups for file hashes and network indicators.

mod allowlist;
mod backend;
mod indicator;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use allowlist::{filter_indicators, is_local_host, registrable_domain, TopDomainList};
pub use backend::{BackendError, EngineCounts, FixtureBackend, HttpBackend, HttpBackendConfig, IntelBackend};
pub use indicator::{is_host_name, Indicator, IndicatorKind};

use crate::clock::{Clock, RateLimiter, SystemClock};

pub const DEFAULT_THRESHOLD: u32 = 4;
pub const DEFAULT_TTL_SECS: u64 = 7 * 24 * 3600;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntelError {
    #[error("invalid {kind} indicator `{value}`")]
    IndicatorInvalid { kind: IndicatorKind, value: String },
    #[error("backend `{backend}` unavailable after {attempts} attempt(s): {message}; retry in {retry_after_ms} ms")]
    BackendUnavailable { backend: String, message: String, attempts: u32, retry_after_ms: u64 },
    #[error("backend `{backend}` rate limited after {attempts} attempt(s); retry in {retry_after_ms} ms")]
    RateLimited { backend: String, attempts: u32, retry_after_ms: u64 },
    #[error("allowlist `{path}` unreadable: {message}")]
    AllowlistUnreadable { path: String, message: String },
    #[error("intel fixture unparseable: {0}")]
    FixtureUnparseable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntelVerdict {
    pub indicator: Indicator,
    pub engines_total: u32,
    pub engines_positive: u32,
    /// Seconds since the Unix epoch.
    pub fetched_at: u64,
    pub backend: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThreatClass {
    Clean,
    Flagged,
    Malicious,
}

impl ThreatClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ThreatClass::Clean => "clean",
            ThreatClass::Flagged => "flagged",
            ThreatClass::Malicious => "malicious",
        }
    }
}

pub fn classify_positives(positives: u32, threshold: u32) -> ThreatClass {
    if positives == 0 {
        ThreatClass::Clean
    } else if positives >= threshold {
        ThreatClass::Malicious
    } else {
        ThreatClass::Flagged
    }
}

pub fn classify(verdict: &IntelVerdict, threshold: u32) -> ThreatClass {
    classify_positives(verdict.engines_positive, threshold)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackendConfig {
    Fixture { path: PathBuf },
    Http(HttpBackendConfig),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntelConfig {
    pub backend: Option<BackendConfig>,
    pub threshold: u32,
    pub ttl_secs: u64,
    /// Maximum backend calls per minute; 0 for no limit.
    pub rate_per_minute: u32,
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub cache_dir: Option<PathBuf>,
    pub allowlist: Option<PathBuf>,
}

impl Default for IntelConfig {
    fn default() -> Self {
        Self {
            backend: None,
            threshold: DEFAULT_THRESHOLD,
            ttl_secs: DEFAULT_TTL_SECS,
            rate_per_minute: 4,
            max_attempts: 3,
            initial_backoff_ms: 1_000,
            cache_dir: None,
            allowlist: None,
        }
    }
}

impl IntelConfig {
    pub fn build_backend(&self) -> Result<Option<Arc<dyn IntelBackend>>, IntelError> {
        Ok(match &self.backend {
            None => None,
            Some(BackendConfig::Fixture { path }) => Some(Arc::new(FixtureBackend::load(path)?)),
            Some(BackendConfig::Http(cfg)) => Some(Arc::new(HttpBackend::new(cfg.clone()))),
        })
    }
}

type Slot = Arc<Mutex<Option<IntelVerdict>>>;

/// Caching, rate-limited front end to an [`IntelBackend`].
///
/// Concurrent lookups of the same indicator wait on one slot, so at most one
/// backend request per indicator is in flight.
pub struct IntelClient {
    backend: Arc<dyn IntelBackend>,
    clock: Arc<dyn Clock>,
    limiter: RateLimiter,
    slots: Mutex<HashMap<Indicator, Slot>>,
    ttl_ms: u64,
    max_attempts: u32,
    initial_backoff_ms: u64,
    cache_dir: Option<PathBuf>,
    calls: AtomicUsize,
}

impl IntelClient {
    pub fn new(backend: Arc<dyn IntelBackend>, config: &IntelConfig) -> Self {
        Self::with_clock(backend, config, Arc::new(SystemClock))
    }

    pub fn with_clock(backend: Arc<dyn IntelBackend>, config: &IntelConfig, clock: Arc<dyn Clock>) -> Self {
        Self {
            backend,
            limiter: RateLimiter::new(config.rate_per_minute, clock.clone()),
            clock,
            slots: Mutex::new(HashMap::new()),
            ttl_ms: config.ttl_secs.saturating_mul(1000),
            max_attempts: config.max_attempts.max(1),
            initial_backoff_ms: config.initial_backoff_ms,
            cache_dir: config.cache_dir.clone(),
            calls: AtomicUsize::new(0),
        }
    }

    /// Number of requests sent to the backend, including retries.
    pub fn backend_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn fresh(&self, v: &IntelVerdict) -> bool {
        self.clock.now_ms().saturating_sub(v.fetched_at.saturating_mul(1000)) < self.ttl_ms
    }

    fn cache_path(&self, indicator: &Indicator) -> Option<PathBuf> {
        let dir = self.cache_dir.as_ref()?;
        let key = hex::encode(Sha256::digest(indicator.to_string().as_bytes()));
        Some(dir.join(format!("{key}.json")))
    }

    fn read_disk(&self, indicator: &Indicator) -> Option<IntelVerdict> {
        let text = std::fs::read_to_string(self.cache_path(indicator)?).ok()?;
        let v: IntelVerdict = serde_json::from_str(&text).ok()?;
        (v.indicator == *indicator && self.fresh(&v)).then_some(v)
    }

    fn write_disk(&self, v: &IntelVerdict) {
        if let Some(path) = self.cache_path(&v.indicator) {
            if let Some(dir) = path.parent() {
                let _ = std::fs::create_dir_all(dir);
            }
            let tmp = path.with_extension("tmp");
            if std::fs::write(&tmp, serde_json::to_vec(v).unwrap_or_default()).is_ok() {
                let _ = std::fs::rename(&tmp, &path);
            }
        }
    }

    pub fn lookup(&self, indicator: &Indicator) -> Result<IntelVerdict, IntelError> {
        let slot = {
            let mut slots = self.slots.lock().unwrap_or_else(|e| e.into_inner());
            slots.entry(indicator.clone()).or_default().clone()
        };
        let mut cached = slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(v) = cached.as_ref().filter(|v| self.fresh(v)) {
            return Ok(v.clone());
        }
        if let Some(v) = self.read_disk(indicator) {
            *cached = Some(v.clone());
            return Ok(v);
        }
        let v = self.fetch_with_retry(indicator)?;
        self.write_disk(&v);
        *cached = Some(v.clone());
        Ok(v)
    }

    fn fetch_with_retry(&self, indicator: &Indicator) -> Result<IntelVerdict, IntelError> {
        let name = self.backend.name().to_string();
        let mut backoff = self.initial_backoff_ms;
        let mut last = BackendError::Unavailable("no attempt made".into());
        for attempt in 1..=self.max_attempts {
            self.limiter.acquire();
            self.calls.fetch_add(1, Ordering::SeqCst);
            match self.backend.fetch(indicator) {
                Ok(found) => {
                    let (counts, backend) = match found {
                        Some(c) => (c, name),
                        None => (EngineCounts { engines_total: 0, engines_positive: 0 }, format!("{name}-miss")),
                    };
                    return Ok(IntelVerdict {
                        indicator: indicator.clone(),
                        engines_total: counts.engines_total,
                        engines_positive: counts.engines_positive.min(counts.engines_total),
                        fetched_at: self.clock.now_secs(),
                        backend,
                    });
                }
                Err(e) => {
                    let wait = match &e {
                        BackendError::RateLimited(Some(after)) => (*after).max(backoff),
                        _ => backoff,
                    };
                    last = e;
                    if attempt < self.max_attempts {
                        self.clock.sleep_ms(wait);
                        backoff = backoff.saturating_mul(2);
                    }
                }
            }
        }
        Err(match last {
            BackendError::RateLimited(after) => IntelError::RateLimited {
                backend: name,
                attempts: self.max_attempts,
                retry_after_ms: after.unwrap_or(backoff),
            },
            BackendError::Unavailable(message) => IntelError::BackendUnavailable {
                backend: name,
                message,
                attempts: self.max_attempts,
                retry_after_ms: backoff,
            },
        })
    }
}

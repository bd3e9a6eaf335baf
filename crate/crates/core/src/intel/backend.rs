use std::collections::HashMap;
use std::io::Read;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Indicator, IndicatorKind, IntelError};

/// Engine counts reported by a backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineCounts {
    pub engines_total: u32,
    pub engines_positive: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendError {
    Unavailable(String),
    /// The backend asked us to slow down, optionally saying for how long.
    RateLimited(Option<u64>),
}

pub trait IntelBackend: Send + Sync {
    fn name(&self) -> &str;
    /// `Ok(None)` means the backend has no record of the indicator.
    fn fetch(&self, indicator: &Indicator) -> Result<Option<EngineCounts>, BackendError>;
}

#[derive(Debug, Deserialize)]
struct FixtureRow {
    kind: String,
    value: String,
    engines_total: u32,
    engines_positive: u32,
}

/// Offline backend answering from a fixed table.
#[derive(Debug, Default)]
pub struct FixtureBackend {
    table: HashMap<Indicator, EngineCounts>,
    calls: AtomicUsize,
}

impl FixtureBackend {
    pub fn new(rows: impl IntoIterator<Item = (Indicator, EngineCounts)>) -> Self {
        Self { table: rows.into_iter().collect(), calls: AtomicUsize::new(0) }
    }

    /// Reads a CSV table with columns `kind,value,engines_total,engines_positive`.
    pub fn from_csv(text: &str) -> Result<Self, IntelError> {
        let bad = |m: String| IntelError::FixtureUnparseable(m);
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, row) in reader.deserialize::<FixtureRow>().enumerate() {
            let row = row.map_err(|e| bad(e.to_string()))?;
            let kind = IndicatorKind::parse(&row.kind).ok_or_else(|| bad(format!("row {}: unknown kind `{}`", i + 1, row.kind)))?;
            if row.engines_positive > row.engines_total {
                return Err(bad(format!("row {}: more positives than engines", i + 1)));
            }
            let counts = EngineCounts { engines_total: row.engines_total, engines_positive: row.engines_positive };
            rows.push((Indicator::new(kind, &row.value)?, counts));
        }
        Ok(Self::new(rows))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IntelError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| IntelError::FixtureUnparseable(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_csv(&text)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl IntelBackend for FixtureBackend {
    fn name(&self) -> &str {
        "fixture"
    }

    fn fetch(&self, indicator: &Indicator) -> Result<Option<EngineCounts>, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(self.table.get(indicator).copied())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpBackendConfig {
    /// URL with `{kind}` and `{value}` placeholders.
    pub url_template: String,
    #[serde(default)]
    pub auth_header: Option<String>,
    /// Environment variable holding the credential for `auth_header`.
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_total_pointer")]
    pub total_pointer: String,
    #[serde(default = "default_positive_pointer")]
    pub positive_pointer: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_total_pointer() -> String {
    "/engines_total".into()
}

fn default_positive_pointer() -> String {
    "/engines_positive".into()
}

fn default_timeout() -> u64 {
    30
}

impl HttpBackendConfig {
    pub fn new(url_template: impl Into<String>) -> Self {
        Self {
            url_template: url_template.into(),
            auth_header: None,
            auth_env: None,
            total_pointer: default_total_pointer(),
            positive_pointer: default_positive_pointer(),
            timeout_secs: default_timeout(),
        }
    }
}

/// Generic JSON-over-HTTP backend. Engine counts are read from the response
/// with JSON pointers; 404 is a miss, 429 is a rate limit.
pub struct HttpBackend {
    config: HttpBackendConfig,
    agent: ureq::Agent,
    credential: Option<String>,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Self {
        let credential = config.auth_env.as_deref().and_then(|v| std::env::var(v).ok());
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(config.timeout_secs)).build();
        Self { config, agent, credential }
    }

    pub fn request_url(&self, indicator: &Indicator) -> String {
        let value: String = url::form_urlencoded::byte_serialize(indicator.value.as_bytes()).collect();
        self.config.url_template.replace("{kind}", indicator.kind.as_str()).replace("{value}", &value)
    }

    fn counts(&self, body: &Value) -> Result<EngineCounts, BackendError> {
        let read = |ptr: &str| {
            body.pointer(ptr)
                .and_then(Value::as_u64)
                .and_then(|n| u32::try_from(n).ok())
                .ok_or_else(|| BackendError::Unavailable(format!("response lacks a count at `{ptr}`")))
        };
        let counts = EngineCounts {
            engines_total: read(&self.config.total_pointer)?,
            engines_positive: read(&self.config.positive_pointer)?,
        };
        if counts.engines_positive > counts.engines_total {
            return Err(BackendError::Unavailable("response has more positives than engines".into()));
        }
        Ok(counts)
    }
}

impl IntelBackend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn fetch(&self, indicator: &Indicator) -> Result<Option<EngineCounts>, BackendError> {
        let mut req = self.agent.get(&self.request_url(indicator));
        if let (Some(h), Some(c)) = (&self.config.auth_header, &self.credential) {
            req = req.set(h, c);
        }
        match req.call() {
            Ok(resp) => {
                let mut body = String::new();
                resp.into_reader()
                    .take(4 * 1024 * 1024)
                    .read_to_string(&mut body)
                    .map_err(|e| BackendError::Unavailable(e.to_string()))?;
                let json: Value = serde_json::from_str(&body).map_err(|e| BackendError::Unavailable(e.to_string()))?;
                self.counts(&json).map(Some)
            }
            Err(ureq::Error::Status(404, _)) => Ok(None),
            Err(ureq::Error::Status(429, resp)) => {
                let after = resp.header("retry-after").and_then(|s| s.trim().parse::<u64>().ok()).map(|s| s * 1000);
                Err(BackendError::RateLimited(after))
            }
            Err(ureq::Error::Status(code, _)) => Err(BackendError::Unavailable(format!("HTTP {code}"))),
            Err(e) => Err(BackendError::Unavailable(e.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Write};
    use std::net::TcpListener;

    /// Serves one canned response per connection, recording request lines.
    fn serve(responses: Vec<&'static str>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for resp in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut first = String::new();
                reader.read_line(&mut first).unwrap();
                let mut headers = vec![first.trim().to_string()];
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line.trim().is_empty() {
                        break;
                    }
                    headers.push(line.trim().to_string());
                }
                seen.push(headers.join("\n"));
                stream.write_all(resp.as_bytes()).unwrap();
            }
            seen
        });
        (format!("http://{addr}"), handle)
    }

    fn reply(status: &str, body: &str) -> &'static str {
        Box::leak(
            format!("HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len())
                .into_boxed_str(),
        )
    }

    #[test]
    fn http_backend_reads_counts_and_statuses() {
        let (base, handle) = serve(vec![
            reply("200 OK", r#"{"data": {"stats": {"total": 70, "malicious": 5}}}"#),
            reply("404 Not Found", "{}"),
            "HTTP/1.1 429 Too Many Requests\r\nRetry-After: 2\r\nContent-Length: 0\r\nConnection: close\r\n\r\n",
            reply("503 Service Unavailable", "{}"),
        ]);
        std::env::set_var("VSIXSCAN_TEST_INTEL_KEY", "secret");
        let mut cfg = HttpBackendConfig::new(format!("{base}/v1/{{kind}}/{{value}}"));
        cfg.total_pointer = "/data/stats/total".into();
        cfg.positive_pointer = "/data/stats/malicious".into();
        cfg.auth_header = Some("x-apikey".into());
        cfg.auth_env = Some("VSIXSCAN_TEST_INTEL_KEY".into());
        let b = HttpBackend::new(cfg);
        let ind = Indicator::domain("sampctl.com").unwrap();
        assert_eq!(b.fetch(&ind), Ok(Some(EngineCounts { engines_total: 70, engines_positive: 5 })));
        assert_eq!(b.fetch(&ind), Ok(None));
        assert_eq!(b.fetch(&ind), Err(BackendError::RateLimited(Some(2000))));
        assert!(matches!(b.fetch(&ind), Err(BackendError::Unavailable(_))));
        let seen = handle.join().unwrap();
        assert!(seen[0].starts_with("GET /v1/domain/sampctl.com HTTP/1.1"));
        assert!(seen[0].to_ascii_lowercase().contains("x-apikey: secret"));
    }

    #[test]
    fn fixture_table() {
        let h = "a".repeat(64);
        let csv = format!("kind,value,engines_total,engines_positive\n# comment\nfile-hash,{h},70,5\ndomain,Sampctl.com,90,6\n");
        let b = FixtureBackend::from_csv(&csv).unwrap();
        assert_eq!(b.fetch(&Indicator::file_hash(&h).unwrap()).unwrap().unwrap().engines_positive, 5);
        assert_eq!(b.fetch(&Indicator::domain("sampctl.com").unwrap()).unwrap().unwrap().engines_total, 90);
        assert_eq!(b.fetch(&Indicator::domain("other.test").unwrap()).unwrap(), None);
        assert_eq!(b.calls(), 3);
        assert!(FixtureBackend::from_csv("kind,value,engines_total,engines_positive\ndomain,a.test,3,4\n").is_err());
        assert!(FixtureBackend::from_csv("kind,value,engines_total,engines_positive\nhash,a.test,3,1\n").is_err());
    }
}

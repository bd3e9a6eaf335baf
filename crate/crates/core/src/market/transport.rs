use std::collections::BTreeMap;
use std::io::Read;
use std::time::Duration;

use super::profile::Method;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub method: Method,
    pub url: String,
    pub body: Option<String>,
    pub headers: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub body: Vec<u8>,
    pub retry_after_ms: Option<u64>,
}

/// Sends one request. `Err` means no HTTP response was received.
pub trait Transport: Send + Sync {
    fn send(&self, request: &Request) -> Result<Response, String>;
}

/// Largest response body accepted.
pub const MAX_BODY: u64 = 512 * 1024 * 1024;

pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout_secs: u64) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(timeout_secs.max(1)))
            .user_agent(concat!("vsixscan/", env!("CARGO_PKG_VERSION")))
            .build();
        Self { agent }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new(60)
    }
}

fn finish(resp: ureq::Response) -> Result<Response, String> {
    let status = resp.status();
    let retry_after_ms = resp.header("retry-after").and_then(|v| v.trim().parse::<u64>().ok()).map(|s| s * 1000);
    let mut body = Vec::new();
    resp.into_reader().take(MAX_BODY).read_to_end(&mut body).map_err(|e| e.to_string())?;
    Ok(Response { status, body, retry_after_ms })
}

impl Transport for HttpTransport {
    fn send(&self, request: &Request) -> Result<Response, String> {
        let method = match request.method {
            Method::Get => "GET",
            Method::Post => "POST",
        };
        let mut req = self.agent.request(method, &request.url);
        for (k, v) in &request.headers {
            req = req.set(k, v);
        }
        let result = match &request.body {
            Some(body) => req.send_string(body),
            None => req.call(),
        };
        match result {
            Ok(resp) | Err(ureq::Error::Status(_, resp)) => finish(resp),
            Err(e) => Err(e.to_string()),
        }
    }
}

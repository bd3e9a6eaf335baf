use std::collections::HashSet;
use std::net::IpAddr;
use std::path::Path;

use super::indicator::parse_ip;
use super::IntelError;

/// Popular registrable domains excluded from threat-intel lookups.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TopDomainList {
    domains: HashSet<String>,
}

impl TopDomainList {
    /// One domain per line. Blank lines and `#` comments are ignored; for
    /// ranked CSV exports the last comma-separated field is used and a
    /// `domain` header is skipped.
    pub fn parse(text: &str) -> Self {
        let domains = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.rsplit(',').next().unwrap_or(l).trim().trim_end_matches('.').to_ascii_lowercase())
            .filter(|d| !d.is_empty() && d != "domain")
            .collect();
        Self { domains }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IntelError> {
        let path = path.as_ref();
        std::fs::read_to_string(path)
            .map(|t| Self::parse(&t))
            .map_err(|e| IntelError::AllowlistUnreadable { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn contains(&self, domain: &str) -> bool {
        self.domains.contains(domain)
    }
}

impl<S: AsRef<str>> FromIterator<S> for TopDomainList {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self { domains: iter.into_iter().map(|s| s.as_ref().trim().to_ascii_lowercase()).collect() }
    }
}

fn local_ip(ip: IpAddr) -> bool {
    match ip {
        IpAddr::V4(v4) => v4.is_loopback() || v4.is_private() || v4.is_link_local() || v4.is_unspecified() || v4.is_broadcast(),
        IpAddr::V6(v6) => {
            let seg = v6.segments()[0];
            v6.is_loopback()
                || v6.is_unspecified()
                || (seg & 0xfe00) == 0xfc00
                || (seg & 0xffc0) == 0xfe80
                || v6.to_ipv4_mapped().is_some_and(|v4| local_ip(IpAddr::V4(v4)))
        }
    }
}

/// Loopback, private, link-local and unspecified addresses, plus `localhost`.
pub fn is_local_host(host: &str) -> bool {
    let h = host.trim().trim_end_matches('.').to_ascii_lowercase();
    if h == "localhost" || h.ends_with(".localhost") {
        return true;
    }
    parse_ip(&h).is_some_and(local_ip)
}

/// Registrable domain (public suffix plus one label) of a host name.
pub fn registrable_domain(host: &str) -> Option<String> {
    let h = host.trim().trim_end_matches('.').to_ascii_lowercase();
    if parse_ip(&h).is_some() {
        return None;
    }
    psl::domain_str(&h).map(str::to_string)
}

/// Drops local hosts, then hosts whose registrable domain is allowlisted.
/// Survivors are returned lowercased, in input order.
pub fn filter_indicators(domains: &[String], allowlist: &TopDomainList) -> Vec<String> {
    domains
        .iter()
        .map(|d| d.trim().trim_end_matches('.').to_ascii_lowercase())
        .filter(|d| !d.is_empty() && !is_local_host(d))
        .filter(|d| !registrable_domain(d).is_some_and(|r| allowlist.contains(&r)))
        .collect()
}

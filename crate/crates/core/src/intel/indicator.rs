use std::fmt;
use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use super::IntelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndicatorKind {
    FileHash,
    Domain,
    Ip,
    Url,
}

impl IndicatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IndicatorKind::FileHash => "file-hash",
            IndicatorKind::Domain => "domain",
            IndicatorKind::Ip => "ip",
            IndicatorKind::Url => "url",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [IndicatorKind::FileHash, IndicatorKind::Domain, IndicatorKind::Ip, IndicatorKind::Url]
            .into_iter()
            .find(|k| k.as_str() == s.trim())
    }
}

impl fmt::Display for IndicatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A validated, normalized lookup key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Indicator {
    pub kind: IndicatorKind,
    pub value: String,
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.value)
    }
}

pub fn is_host_name(host: &str) -> bool {
    let host = host.strip_suffix('.').unwrap_or(host);
    !host.is_empty()
        && host.len() <= 253
        && host.split('.').all(|label| {
            !label.is_empty()
                && label.len() <= 63
                && !label.starts_with('-')
                && !label.ends_with('-')
                && label.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
        })
}

pub fn parse_ip(text: &str) -> Option<IpAddr> {
    let t = text.strip_prefix('[').and_then(|t| t.strip_suffix(']')).unwrap_or(text);
    t.parse().ok()
}

impl Indicator {
    pub fn new(kind: IndicatorKind, value: &str) -> Result<Self, IntelError> {
        let invalid = || IntelError::IndicatorInvalid { kind, value: value.to_string() };
        let v = value.trim();
        let normalized = match kind {
            IndicatorKind::FileHash => {
                if v.len() != 64 || !v.chars().all(|c| c.is_ascii_hexdigit()) {
                    return Err(invalid());
                }
                v.to_ascii_lowercase()
            }
            IndicatorKind::Domain => {
                if !is_host_name(v) || parse_ip(v).is_some() {
                    return Err(invalid());
                }
                v.trim_end_matches('.').to_ascii_lowercase()
            }
            IndicatorKind::Ip => parse_ip(v).ok_or_else(invalid)?.to_string(),
            IndicatorKind::Url => {
                let u = url::Url::parse(v).map_err(|_| invalid())?;
                if !matches!(u.scheme(), "http" | "https") || u.host_str().is_none() {
                    return Err(invalid());
                }
                u.to_string()
            }
        };
        Ok(Self { kind, value: normalized })
    }

    pub fn file_hash(hex: &str) -> Result<Self, IntelError> {
        Self::new(IndicatorKind::FileHash, hex)
    }

    pub fn domain(host: &str) -> Result<Self, IntelError> {
        Self::new(IndicatorKind::Domain, host)
    }

    /// Guesses the kind from the text: 64 hex digits, an IP literal, a URL,
    /// or else a domain.
    pub fn infer(text: &str) -> Result<Self, IntelError> {
        let t = text.trim();
        if t.len() == 64 && t.chars().all(|c| c.is_ascii_hexdigit()) {
            Self::new(IndicatorKind::FileHash, t)
        } else if parse_ip(t).is_some() {
            Self::new(IndicatorKind::Ip, t)
        } else if t.contains("://") {
            Self::new(IndicatorKind::Url, t)
        } else {
            Self::new(IndicatorKind::Domain, t)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_and_normalization() {
        let h = "AB".repeat(32);
        assert_eq!(Indicator::file_hash(&h).unwrap().value, "ab".repeat(32));
        assert!(Indicator::file_hash("abc").is_err());
        assert!(Indicator::file_hash(&"g".repeat(64)).is_err());
        assert_eq!(Indicator::domain("Sampctl.COM.").unwrap().value, "sampctl.com");
        for bad in ["", "-a.com", "a..b", "a_b.com", "1.2.3.4", "exa mple.com"] {
            assert!(Indicator::domain(bad).is_err(), "{bad}");
        }
        assert_eq!(Indicator::new(IndicatorKind::Ip, "[::1]").unwrap().value, "::1");
        assert!(Indicator::new(IndicatorKind::Ip, "300.1.1.1").is_err());
        assert!(Indicator::new(IndicatorKind::Url, "ftp://x.test/").is_err());
        assert_eq!(Indicator::new(IndicatorKind::Url, "https://X.test/a").unwrap().value, "https://x.test/a");
    }

    #[test]
    fn infers_kinds() {
        assert_eq!(Indicator::infer(&"0".repeat(64)).unwrap().kind, IndicatorKind::FileHash);
        assert_eq!(Indicator::infer("10.0.0.1").unwrap().kind, IndicatorKind::Ip);
        assert_eq!(Indicator::infer("http://a.test").unwrap().kind, IndicatorKind::Url);
        assert_eq!(Indicator::infer("a.test").unwrap().kind, IndicatorKind::Domain);
    }
}

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("version `{0}` is not parseable")]
pub struct VersionUnparseable(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PreId {
    Num(u64),
    Alpha(String),
}

impl Ord for PreId {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (PreId::Num(a), PreId::Num(b)) => a.cmp(b),
            (PreId::Num(_), PreId::Alpha(_)) => Ordering::Less,
            (PreId::Alpha(_), PreId::Num(_)) => Ordering::Greater,
            (PreId::Alpha(a), PreId::Alpha(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for PreId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PreId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PreId::Num(n) => write!(f, "{n}"),
            PreId::Alpha(s) => f.write_str(s),
        }
    }
}

/// A semantic version. Build metadata is accepted and discarded.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Version {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
    pub pre: Vec<PreId>,
}

impl Version {
    pub const fn new(major: u64, minor: u64, patch: u64) -> Self {
        Self { major, minor, patch, pre: Vec::new() }
    }

    pub fn is_prerelease(&self) -> bool {
        !self.pre.is_empty()
    }

    pub fn core(&self) -> (u64, u64, u64) {
        (self.major, self.minor, self.patch)
    }

    pub fn release(&self) -> Version {
        Version::new(self.major, self.minor, self.patch)
    }

    /// Smallest prerelease of this version's core, `M.N.P-0`.
    pub fn min_prerelease(&self) -> Version {
        Version { pre: vec![PreId::Num(0)], ..self.release() }
    }

    /// Smallest version strictly greater than this one.
    pub fn successor(&self) -> Version {
        if self.pre.is_empty() {
            Version::new(self.major, self.minor, self.patch + 1).min_prerelease()
        } else {
            let mut pre = self.pre.clone();
            pre.push(PreId::Num(0));
            Version { pre, ..self.clone() }
        }
    }
}

impl Ord for Version {
    fn cmp(&self, other: &Self) -> Ordering {
        self.core().cmp(&other.core()).then_with(|| match (self.pre.is_empty(), other.pre.is_empty()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => self.pre.cmp(&other.pre),
        })
    }
}

impl PartialOrd for Version {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)?;
        for (i, id) in self.pre.iter().enumerate() {
            f.write_str(if i == 0 { "-" } else { "." })?;
            write!(f, "{id}")?;
        }
        Ok(())
    }
}

impl FromStr for Version {
    type Err = VersionUnparseable;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_version(s)
    }
}

pub(crate) fn parse_prerelease(text: &str) -> Option<Vec<PreId>> {
    text.split('.')
        .map(|id| {
            if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
                None
            } else if id.chars().all(|c| c.is_ascii_digit()) {
                if id.len() > 1 && id.starts_with('0') {
                    return None;
                }
                id.parse().ok().map(PreId::Num)
            } else {
                Some(PreId::Alpha(id.to_string()))
            }
        })
        .collect()
}

pub(crate) fn numeric(part: &str) -> Option<u64> {
    if part.is_empty() || !part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    part.parse().ok()
}

/// Parses `M`, `M.N` or `M.N.P` with an optional leading `v` and optional
/// `-prerelease` / `+build` suffixes. Missing components default to 0.
pub fn parse_version(text: &str) -> Result<Version, VersionUnparseable> {
    let err = || VersionUnparseable(text.to_string());
    let t = text.trim();
    let t = t.strip_prefix('=').unwrap_or(t).trim_start();
    let t = t.strip_prefix(['v', 'V']).unwrap_or(t);
    let t = t.split_once('+').map_or(t, |(v, _)| v);
    let (core, pre) = match t.split_once('-') {
        Some((c, p)) => (c, Some(p)),
        None => (t, None),
    };
    let parts: Vec<&str> = core.split('.').collect();
    if parts.len() > 3 {
        return Err(err());
    }
    let mut nums = [0u64; 3];
    for (slot, part) in nums.iter_mut().zip(&parts) {
        *slot = numeric(part).ok_or_else(err)?;
    }
    let pre = match pre {
        Some(p) => parse_prerelease(p).ok_or_else(err)?,
        None => Vec::new(),
    };
    Ok(Version { major: nums[0], minor: nums[1], patch: nums[2], pre })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Version {
        parse_version(s).unwrap()
    }

    #[test]
    fn parses_short_forms() {
        assert_eq!(v("0.0.1"), Version::new(0, 0, 1));
        assert_eq!(v("v2"), Version::new(2, 0, 0));
        assert_eq!(v("1.4"), Version::new(1, 4, 0));
        assert_eq!(v("1.2.3+build.5"), Version::new(1, 2, 3));
        assert_eq!(v("1.2.3-beta.1").to_string(), "1.2.3-beta.1");
        for bad in ["", "x", "1.a", "1.2.3.4", "1..2", "1.2.3-", "1.2.3-a..b", "1.0.0-01", "-1", "1.2.x"] {
            assert!(parse_version(bad).is_err(), "{bad}");
        }
    }

    /// Hand-ordered pairs following the published precedence rules.
    #[test]
    fn precedence_table() {
        let pairs = [
            ("1.2.3-beta.1", "1.2.3"),
            ("1.0.0", "2.0.0"),
            ("2.0.0", "2.1.0"),
            ("2.1.0", "2.1.1"),
            ("1.0.0-alpha", "1.0.0-alpha.1"),
            ("1.0.0-alpha.1", "1.0.0-alpha.beta"),
            ("1.0.0-alpha.beta", "1.0.0-beta"),
            ("1.0.0-beta", "1.0.0-beta.2"),
            ("1.0.0-beta.2", "1.0.0-beta.11"),
            ("1.0.0-beta.11", "1.0.0-rc.1"),
            ("1.0.0-rc.1", "1.0.0"),
            ("1.0.0-1", "1.0.0-alpha"),
            ("1.0.0-rc.1", "1.0.1-alpha"),
            ("0.9.9", "1.0.0-0"),
            ("1.0.0-0", "1.0.0-0.0"),
        ];
        for (lo, hi) in pairs {
            assert!(v(lo) < v(hi), "{lo} < {hi}");
            assert!(v(hi) > v(lo));
        }
        assert_eq!(v("1.0.0+a").cmp(&v("1.0.0+b")), Ordering::Equal);
    }

    #[test]
    fn successor_is_immediate() {
        assert_eq!(v("1.2.3").successor(), v("1.2.4-0"));
        assert_eq!(v("1.2.3-rc.1").successor(), v("1.2.3-rc.1.0"));
        assert!(v("1.2.3-rc.1") < v("1.2.3-rc.1").successor());
    }
}

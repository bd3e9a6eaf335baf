use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::range::{parse_range, VersionRange};
use crate::finding::Severity;

/// First line of every database file.
pub const DB_HEADER: &str = "#vsixscan-vulndb v1";

static CVE_ID: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^CVE-(\d{4}|FIX)-\d{4,}$").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VulnSeverity {
    Low,
    Medium,
    High,
    Critical,
}

impl VulnSeverity {
    pub fn as_severity(self) -> Severity {
        match self {
            VulnSeverity::Low => Severity::Low,
            VulnSeverity::Medium => Severity::Medium,
            VulnSeverity::High => Severity::High,
            VulnSeverity::Critical => Severity::Critical,
        }
    }
}

impl fmt::Display for VulnSeverity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_severity().as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VulnerabilityRecord {
    pub cve_id: String,
    pub package_name: String,
    pub affected_range: String,
    pub severity: VulnSeverity,
    #[serde(default)]
    pub summary: String,
}

#[derive(Debug, Error)]
pub enum DbError {
    #[error("cannot read vulnerability database: {0}")]
    Io(#[from] std::io::Error),
    #[error("vulnerability database is unparseable at line {line}: {message}")]
    DbUnparseable { line: usize, message: String },
    #[error("duplicate record for {cve_id} / {package}")]
    DuplicateRecord { cve_id: String, package: String },
}

fn unparseable(line: usize, message: impl Into<String>) -> DbError {
    DbError::DbUnparseable { line, message: message.into() }
}

/// Immutable, validated set of vulnerability records indexed by package.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VulnDatabase {
    records: Vec<VulnerabilityRecord>,
    ranges: Vec<VersionRange>,
    index: BTreeMap<String, Vec<usize>>,
    pub source_stamp: String,
}

impl Default for VulnDatabase {
    fn default() -> Self {
        Self::new(Vec::new(), "empty").expect("empty database is valid")
    }
}

impl VulnDatabase {
    pub fn new(records: Vec<VulnerabilityRecord>, source_stamp: impl Into<String>) -> Result<Self, DbError> {
        Self::build(records.into_iter().enumerate().map(|(i, r)| (i + 1, r)).collect(), source_stamp.into())
    }

    fn build(records: Vec<(usize, VulnerabilityRecord)>, source_stamp: String) -> Result<Self, DbError> {
        let mut seen = BTreeSet::new();
        let mut ranges = Vec::with_capacity(records.len());
        let mut index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut out = Vec::with_capacity(records.len());
        for (line, r) in records {
            if !CVE_ID.is_match(&r.cve_id) {
                return Err(unparseable(line, format!("`{}` is not a CVE id", r.cve_id)));
            }
            if r.package_name.trim().is_empty() {
                return Err(unparseable(line, "empty package_name"));
            }
            let range = parse_range(&r.affected_range).map_err(|e| unparseable(line, e.to_string()))?;
            if !seen.insert((r.cve_id.clone(), r.package_name.clone())) {
                return Err(DbError::DuplicateRecord { cve_id: r.cve_id, package: r.package_name });
            }
            index.entry(r.package_name.clone()).or_default().push(out.len());
            ranges.push(range);
            out.push(r);
        }
        Ok(Self { records: out, ranges, index, source_stamp })
    }

    pub fn records(&self) -> &[VulnerabilityRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn packages(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    /// Records for a package, each with its parsed affected range.
    pub fn lookup<'a>(&'a self, package: &str) -> impl Iterator<Item = (&'a VulnerabilityRecord, &'a VersionRange)> + 'a {
        self.index
            .get(package)
            .into_iter()
            .flatten()
            .map(|&i| (&self.records[i], &self.ranges[i]))
    }

    pub fn parse(text: &str) -> Result<Self, DbError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let stamp = match lines.find(|(_, l)| !l.is_empty()) {
            Some((_, first)) => {
                let rest = first
                    .strip_prefix(DB_HEADER)
                    .ok_or_else(|| unparseable(1, format!("missing `{DB_HEADER}` header")))?;
                let rest = rest.trim();
                if rest.is_empty() {
                    String::new()
                } else {
                    rest.strip_prefix("source=").ok_or_else(|| unparseable(1, "unexpected header field"))?.to_string()
                }
            }
            None => return Err(unparseable(1, "empty file")),
        };
        let mut records = Vec::new();
        for (n, line) in lines {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let rec: VulnerabilityRecord = serde_json::from_str(line).map_err(|e| unparseable(n, e.to_string()))?;
            records.push((n, rec));
        }
        Self::build(records, stamp)
    }

    pub fn to_text(&self) -> String {
        let mut out = DB_HEADER.to_string();
        if !self.source_stamp.is_empty() {
            out.push_str(" source=");
            out.push_str(&self.source_stamp);
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn load_vuln_db(path: impl AsRef<Path>) -> Result<VulnDatabase, DbError> {
    VulnDatabase::parse(&std::fs::read_to_string(path)?)
}

/// Converts one OSV-format advisory (as published by public advisory feeds
/// for the npm ecosystem) into records. Each `affected[]` entry becomes one
/// record; `introduced`/`fixed`/`last_affected` events become a range.
/// The advisory's CVE alias is used as the id; advisories without one are skipped.
pub fn records_from_osv(advisory: &Value, severity: VulnSeverity) -> Vec<VulnerabilityRecord> {
    let cve = advisory
        .get("aliases")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
        .chain(advisory.get("id"))
        .filter_map(Value::as_str)
        .find(|id| CVE_ID.is_match(id));
    let Some(cve) = cve else { return Vec::new() };
    let summary = advisory.get("summary").and_then(Value::as_str).unwrap_or("").to_string();
    let mut out = Vec::new();
    for affected in advisory.get("affected").and_then(Value::as_array).into_iter().flatten() {
        let Some(name) = affected.pointer("/package/name").and_then(Value::as_str) else { continue };
        let mut sets = Vec::new();
        for range in affected.get("ranges").and_then(Value::as_array).into_iter().flatten() {
            let mut lo: Option<String> = None;
            for ev in range.get("events").and_then(Value::as_array).into_iter().flatten() {
                if let Some(v) = ev.get("introduced").and_then(Value::as_str) {
                    lo = Some(v.to_string());
                } else if let Some(v) = ev.get("fixed").and_then(Value::as_str) {
                    sets.push(bounded(lo.take(), &format!("<{v}")));
                } else if let Some(v) = ev.get("last_affected").and_then(Value::as_str) {
                    sets.push(bounded(lo.take(), &format!("<={v}")));
                }
            }
            if let Some(l) = lo {
                sets.push(bounded(Some(l), ""));
            }
        }
        if sets.is_empty() {
            continue;
        }
        let affected_range = sets.join(" || ");
        if parse_range(&affected_range).is_ok() {
            out.push(VulnerabilityRecord {
                cve_id: cve.to_string(),
                package_name: name.to_string(),
                affected_range,
                severity,
                summary: summary.clone(),
            });
        }
    }
    out
}

fn bounded(lo: Option<String>, hi: &str) -> String {
    match lo.as_deref() {
        None | Some("0") => if hi.is_empty() { "*".to_string() } else { hi.to_string() },
        Some(l) if hi.is_empty() => format!(">={l}"),
        Some(l) => format!(">={l} {hi}"),
    }
}

use std::fmt::Write as _;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CorpusSummary, ExtensionReport, SCHEMA_VERSION};
use crate::finding::Finding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Versioned JSON.
    Structured,
    /// Human-readable, with evidence quoted.
    Text,
    /// Comma-separated rows.
    Table,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "structured" | "json" => Ok(Format::Structured),
            "text" => Ok(Format::Text),
            "table" | "csv" => Ok(Format::Table),
            other => Err(format!("unknown format `{other}` (structured, text, table)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("not a structured report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema version {found} is not supported (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u64 },
}

#[derive(Serialize, Deserialize)]
struct ReportSet {
    schema_version: u32,
    reports: Vec<ExtensionReport>,
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("report values serialize");
    out.push(b'\n');
    out
}

fn parse_versioned<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, FormatError> {
    let v: serde_json::Value = serde_json::from_slice(bytes)?;
    let found = v.get("schema_version").and_then(serde_json::Value::as_u64).unwrap_or(0);
    if found != u64::from(SCHEMA_VERSION) {
        return Err(FormatError::SchemaVersion { found });
    }
    Ok(serde_json::from_value(v)?)
}

pub fn parse_report(bytes: &[u8]) -> Result<ExtensionReport, FormatError> {
    parse_versioned(bytes)
}

pub fn parse_reports(bytes: &[u8]) -> Result<Vec<ExtensionReport>, FormatError> {
    parse_versioned::<ReportSet>(bytes).map(|s| s.reports)
}

pub fn parse_summary(bytes: &[u8]) -> Result<CorpusSummary, FormatError> {
    parse_versioned(bytes)
}

fn location(f: &Finding) -> String {
    match &f.location {
        Some(l) if l.line > 0 => format!("{}:{}:{}", l.path, l.line, l.column),
        Some(l) => l.path.clone(),
        None => String::new(),
    }
}

fn text_findings(out: &mut String, title: &str, findings: &[Finding]) {
    if findings.is_empty() {
        return;
    }
    let _ = writeln!(out, "  {title}:");
    for f in findings {
        let loc = location(f);
        let _ = writeln!(out, "    [{}] {}{}{}", f.severity, f.rule_id, if loc.is_empty() { "" } else { " " }, loc);
        let _ = writeln!(out, "        \"{}\"", f.evidence);
    }
}

fn text_report(out: &mut String, r: &ExtensionReport) {
    let _ = writeln!(out, "{}  {} (score {})", r.identity, r.risk.tier.as_str(), r.risk.score);
    let _ = writeln!(out, "  sha256 {}", r.package_sha256);
    if let Some(n) = r.install_count {
        let _ = writeln!(out, "  installs {n}");
    }
    if r.findings.is_empty() && r.dep_findings.is_empty() {
        let _ = writeln!(out, "  no findings");
    }
    text_findings(out, "findings", &r.findings);
    text_findings(out, "dependencies", &r.dep_findings);
    if !r.intel.is_empty() {
        let _ = writeln!(out, "  intel:");
        for e in &r.intel {
            let _ = writeln!(
                out,
                "    {} {} ({}/{} engines, {})",
                e.indicator,
                e.class.as_str(),
                e.engines_positive,
                e.engines_total,
                e.backend
            );
        }
    }
    for e in &r.intel_errors {
        let _ = writeln!(out, "  intel error: {e}");
    }
}

const FINDING_HEADER: [&str; 10] =
    ["extension", "version", "tier", "score", "rule_id", "severity", "category", "location", "evidence", "source"];

fn table_rows(w: &mut csv::Writer<Vec<u8>>, r: &ExtensionReport) {
    let base = [r.identity.canonical_id(), r.identity.version.clone(), r.risk.tier.as_str().to_string(), r.risk.score.to_string()];
    let tagged = r.findings.iter().map(|f| (f, "package")).chain(r.dep_findings.iter().map(|f| (f, "dependency")));
    let mut any = false;
    for (f, source) in tagged {
        any = true;
        let cat = serde_json::to_value(f.category).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        let row = [f.rule_id.to_string(), f.severity.to_string(), cat, location(f), f.evidence.clone(), source.to_string()];
        let _ = w.write_record(base.iter().chain(row.iter()));
    }
    if !any {
        let _ = w.write_record(base.iter().cloned().chain(std::iter::repeat_n(String::new(), 6)));
    }
}

fn table<F: FnOnce(&mut csv::Writer<Vec<u8>>)>(header: &[&str], body: F) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(header);
    body(&mut w);
    w.into_inner().unwrap_or_default()
}

pub fn emit_report(report: &ExtensionReport, format: Format) -> Vec<u8> {
    match format {
        Format::Structured => json(report),
        Format::Text => {
            let mut s = String::new();
            text_report(&mut s, report);
            s.into_bytes()
        }
        Format::Table => table(&FINDING_HEADER, |w| table_rows(w, report)),
    }
}

pub fn emit_reports(reports: &[ExtensionReport], format: Format) -> Vec<u8> {
    match format {
        Format::Structured => json(&ReportSet { schema_version: SCHEMA_VERSION, reports: reports.to_vec() }),
        Format::Text => {
            let mut s = String::new();
            for (i, r) in reports.iter().enumerate() {
                if i > 0 {
                    s.push('\n');
                }
                text_report(&mut s, r);
            }
            s.into_bytes()
        }
        Format::Table => table(&FINDING_HEADER, |w| reports.iter().for_each(|r| table_rows(w, r))),
    }
}

pub fn emit_summary(summary: &CorpusSummary, format: Format) -> Vec<u8> {
    match format {
        Format::Structured => json(summary),
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "{} extensions scanned", summary.extensions_scanned);
            let _ = writeln!(
                s,
                "tiers: {} benign, {} suspicious, {} high-risk",
                summary.tiers.benign, summary.tiers.suspicious, summary.tiers.high_risk
            );
            for r in &summary.rows {
                let _ = writeln!(
                    s,
                    "  {:<14} {:<34} {:>8} {:>14}",
                    r.threat.label(),
                    r.label,
                    r.extension_count,
                    r.cumulative_installs
                );
            }
            if !summary.rows.is_empty() {
                let (a, b) = (summary.total_row_sum, summary.total_distinct);
                let _ = writeln!(s, "  {:<49} {:>8} {:>14}", "Total (row sum)", a.extension_count, a.cumulative_installs);
                let _ = writeln!(s, "  {:<49} {:>8} {:>14}", "Total (distinct extensions)", b.extension_count, b.cumulative_installs);
            }
            if summary.unknown_install_counts > 0 {
                let _ = writeln!(s, "note: {} extension(s) have no known install count and add 0 installs", summary.unknown_install_counts);
            }
            s.into_bytes()
        }
        Format::Table => table(&["Threat", "Suspicious Type", "Extension Count", "Cumulative Install Count"], |w| {
            for r in &summary.rows {
                let _ = w.write_record([
                    r.threat.label(),
                    &r.label,
                    &r.extension_count.to_string(),
                    &r.cumulative_installs.to_string(),
                ]);
            }
            if !summary.rows.is_empty() {
                for (label, t) in [("Total (row sum)", summary.total_row_sum), ("Total (distinct extensions)", summary.total_distinct)] {
                    let _ = w.write_record(["", label, &t.extension_count.to_string(), &t.cumulative_installs.to_string()]);
                }
            }
        }),
    }
}

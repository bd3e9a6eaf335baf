//! Per-extension reports, risk scoring, the threat-taxonomy rows, corpus
//! summaries and report emission.

mod emit;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use emit::{emit_report, emit_reports, emit_summary, parse_report, parse_reports, parse_summary, Format, FormatError};

use crate::finding::{Finding, RuleId};
use crate::identity::ExtensionIdentity;
use crate::intel::{Indicator, IndicatorKind, ThreatClass};
use crate::policy::ScoringPolicy;

/// Version of the structured report schema.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tier {
    Benign,
    Suspicious,
    HighRisk,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Benign => "benign",
            Tier::Suspicious => "suspicious",
            Tier::HighRisk => "high-risk",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Tier::Benign => 0,
            Tier::Suspicious => 1,
            Tier::HighRisk => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Risk {
    pub score: u32,
    pub tier: Tier,
}

/// Intel outcome for one indicator taken from a package.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntelEntry {
    pub indicator: Indicator,
    pub class: ThreatClass,
    pub engines_positive: u32,
    pub engines_total: u32,
    pub backend: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionReport {
    pub schema_version: u32,
    pub identity: ExtensionIdentity,
    pub package_sha256: String,
    /// Marketplace install count at scan time, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub install_count: Option<u64>,
    /// Manifest, package and source findings, sorted.
    pub findings: Vec<Finding>,
    /// Dependency-audit findings, sorted.
    pub dep_findings: Vec<Finding>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intel: Vec<IntelEntry>,
    /// Lookups that failed; the report is complete without them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intel_errors: Vec<String>,
    pub risk: Risk,
}

impl ExtensionReport {
    pub fn all_findings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().chain(&self.dep_findings)
    }

    /// Worst intel class over every indicator, if any was looked up.
    pub fn worst_intel(&self) -> Option<ThreatClass> {
        self.intel.iter().map(|e| e.class).max()
    }
}

/// Sum of severity weights, capped; a malicious intel verdict forces the
/// high-risk tier.
pub fn score<'a>(findings: impl IntoIterator<Item = &'a Finding>, intel: Option<ThreatClass>, policy: &ScoringPolicy) -> Risk {
    let sum: u64 = findings.into_iter().map(|f| u64::from(policy.weights.weight(f.severity))).sum();
    let score = sum.min(u64::from(policy.cap)) as u32;
    let tier = if intel == Some(ThreatClass::Malicious) || score >= policy.high_risk_at {
        Tier::HighRisk
    } else if score >= policy.suspicious_at {
        Tier::Suspicious
    } else {
        Tier::Benign
    };
    Risk { score, tier }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Threat {
    Malicious,
    Vulnerable,
    ApiPrivacy,
    /// Reported alongside the summary rows but outside their totals.
    Supplementary,
}

impl Threat {
    pub fn label(self) -> &'static str {
        match self {
            Threat::Malicious => "Malicious",
            Threat::Vulnerable => "Vulnerable",
            Threat::ApiPrivacy => "API & Privacy",
            Threat::Supplementary => "Supplementary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Row {
    DegradingSecurityPosture,
    CriticalFileAccess,
    VtFlaggedExtension,
    VtFlaggedNetwork,
    MarketMisuse,
    ConcealedOperations,
    Vulnerable,
    Tracking,
    CodeSharing,
    DataSharing,
    SilentInstallation,
}

impl Row {
    pub const ALL: [Row; 11] = [
        Row::DegradingSecurityPosture,
        Row::CriticalFileAccess,
        Row::VtFlaggedExtension,
        Row::VtFlaggedNetwork,
        Row::MarketMisuse,
        Row::ConcealedOperations,
        Row::Vulnerable,
        Row::Tracking,
        Row::CodeSharing,
        Row::DataSharing,
        Row::SilentInstallation,
    ];

    pub fn threat(self) -> Threat {
        match self {
            Row::Vulnerable => Threat::Vulnerable,
            Row::Tracking | Row::CodeSharing | Row::DataSharing => Threat::ApiPrivacy,
            Row::SilentInstallation => Threat::Supplementary,
            _ => Threat::Malicious,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Row::DegradingSecurityPosture => "Degrading the Security Posture",
            Row::CriticalFileAccess => "Critical File Access",
            Row::VtFlaggedExtension => "VT >= threshold Extensions",
            Row::VtFlaggedNetwork => "VT >= threshold Network Requests",
            Row::MarketMisuse => "Market Misuse",
            Row::ConcealedOperations => "Concealed Operations",
            Row::Vulnerable => "Extensions with CVEs",
            Row::Tracking => "Tracking",
            Row::CodeSharing => "Code Sharing",
            Row::DataSharing => "Data Sharing",
            Row::SilentInstallation => "Silent Extension Installation",
        }
    }

    /// Rows whose extension counts add up to the summary totals.
    pub fn in_totals(self) -> bool {
        self.threat() != Threat::Supplementary
    }
}

/// Row a rule maps to, or `None` for the hygiene bucket.
pub fn rule_row(rule: RuleId) -> Option<Row> {
    use RuleId::*;
    Some(match rule {
        SrcTlsDisable | SrcLocalProxy | SrcSettingsMutation | ManUntrustedWs => Row::DegradingSecurityPosture,
        SrcCriticalFile | SrcExtDirAccess => Row::CriticalFileAccess,
        ManNoRepo | ManOversized | ManBundledBinary | ManBundledModules => Row::MarketMisuse,
        SrcHiddenTerminal | SrcSilentInstall => Row::ConcealedOperations,
        DepCve => Row::Vulnerable,
        SrcApiEnvIdentity | SrcApiFsWatcher | SrcApiGetExtension => Row::Tracking,
        SrcApiActiveEditor | SrcApiWorkspaceFs | SrcApiFindFiles | SrcApiApplyEdit => Row::CodeSharing,
        SrcApiClipboard | SrcApiAuthSession | SrcApiOpenExternal | SrcApiCreateTerminal | SrcApiWebview | ManNetDep
        | SrcNetCall => Row::DataSharing,
        ManPackInstall | ManDepInstall | SrcSilentInstallMaybe => Row::SilentInstallation,
        PkgIdMismatch | ManUntrustedWsLimited | SrcUnparseable | SrcSkipped | SrcLossyDecode | DepRangeUnparseable
        | GraphSelfEdge | GraphMalformedTarget | GraphCycle => return None,
    })
}

/// Rows an extension occupies and the hygiene findings that fit no row.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Categorized {
    pub rows: BTreeSet<Row>,
    /// Findings per row, by rule id.
    pub evidence: BTreeMap<Row, BTreeSet<RuleId>>,
    pub hygiene: BTreeSet<RuleId>,
}

pub fn categorize(report: &ExtensionReport) -> Categorized {
    let mut out = Categorized::default();
    for f in report.all_findings() {
        match rule_row(f.rule_id) {
            Some(row) => {
                out.rows.insert(row);
                out.evidence.entry(row).or_default().insert(f.rule_id);
            }
            None => {
                out.hygiene.insert(f.rule_id);
            }
        }
    }
    for e in report.intel.iter().filter(|e| e.class == ThreatClass::Malicious) {
        out.rows.insert(match e.indicator.kind {
            IndicatorKind::FileHash => Row::VtFlaggedExtension,
            _ => Row::VtFlaggedNetwork,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub threat: Threat,
    pub row: Row,
    pub label: String,
    pub extension_count: u64,
    pub cumulative_installs: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Total {
    pub extension_count: u64,
    pub cumulative_installs: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierCounts {
    pub benign: u64,
    pub suspicious: u64,
    pub high_risk: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub schema_version: u32,
    pub extensions_scanned: u64,
    /// Populated rows only, in table order.
    pub rows: Vec<SummaryRow>,
    /// Sum of the counted rows; an extension in two rows counts twice.
    pub total_row_sum: Total,
    /// Distinct extensions in at least one counted row.
    pub total_distinct: Total,
    /// Extensions without a known install count; they contribute 0 installs.
    pub unknown_install_counts: u64,
    pub hygiene_extensions: u64,
    pub tiers: TierCounts,
}

impl Default for CorpusSummary {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            extensions_scanned: 0,
            rows: Vec::new(),
            total_row_sum: Total::default(),
            total_distinct: Total::default(),
            unknown_install_counts: 0,
            hygiene_extensions: 0,
            tiers: TierCounts::default(),
        }
    }
}

/// Aggregates reports into table rows. Install counts come from each
/// report's `install_count`, or from `installs` keyed by canonical id.
/// Reports of the same extension id are counted once; the last one wins.
pub fn summarize(reports: &[ExtensionReport], installs: &BTreeMap<String, u64>) -> CorpusSummary {
    let mut latest: BTreeMap<String, &ExtensionReport> = BTreeMap::new();
    for r in reports {
        latest.insert(r.identity.canonical_id(), r);
    }
    let mut s = CorpusSummary { extensions_scanned: latest.len() as u64, ..Default::default() };
    let mut rows: BTreeMap<Row, Total> = BTreeMap::new();
    for (id, r) in &latest {
        let n = match r.install_count.or_else(|| installs.get(id).copied()) {
            Some(n) => n,
            None => {
                s.unknown_install_counts += 1;
                0
            }
        };
        let c = categorize(r);
        for row in &c.rows {
            let t = rows.entry(*row).or_default();
            t.extension_count += 1;
            t.cumulative_installs += n;
        }
        if c.rows.iter().any(|row| row.in_totals()) {
            s.total_distinct.extension_count += 1;
            s.total_distinct.cumulative_installs += n;
        }
        s.hygiene_extensions += u64::from(!c.hygiene.is_empty());
        match r.risk.tier {
            Tier::Benign => s.tiers.benign += 1,
            Tier::Suspicious => s.tiers.suspicious += 1,
            Tier::HighRisk => s.tiers.high_risk += 1,
        }
    }
    for row in Row::ALL {
        if let Some(t) = rows.get(&row) {
            s.rows.push(SummaryRow {
                threat: row.threat(),
                row,
                label: row.label().to_string(),
                extension_count: t.extension_count,
                cumulative_installs: t.cumulative_installs,
            });
            if row.in_totals() {
                s.total_row_sum.extension_count += t.extension_count;
                s.total_row_sum.cumulative_installs += t.cumulative_installs;
            }
        }
    }
    s
}

/// Exit status for a set of reports: the highest tier present.
pub fn exit_code<'a>(reports: impl IntoIterator<Item = &'a ExtensionReport>) -> i32 {
    reports.into_iter().map(|r| r.risk.tier).max().map_or(0, Tier::exit_code)
}

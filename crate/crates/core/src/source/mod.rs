//! ECMAScript source scanning: API-usage resolution and pattern rules.

mod fallback;
mod resolve;
mod rules;

use serde::{Deserialize, Serialize};

pub use fallback::{fallback_scan, FALLBACK_RULES};
pub use resolve::{resolve_api_references, ApiReference, ArgSummary, Resolved, Resolver, Root, MAX_ALIAS_HOPS};
pub use rules::{critical_fragment, detect_api_usage, detect_patterns, package_of, INSTALL_COMMAND, TLS_ENV_KEY};

use crate::finding::{sort_findings, Finding, Location, RuleId, Severity};
use crate::identity::ExtensionIdentity;
use crate::js::{self, LineIndex, ParseError, SyntaxTree};
use crate::package::ExtensionPackage;
use crate::par::{self, Parallelism};

pub const DEFAULT_MAX_PARSE_BYTES: u64 = 10 * 1024 * 1024;

pub const DEFAULT_NETWORK_MODULES: [&str; 7] = ["axios", "node-fetch", "request", "got", "superagent", "undici", "ws"];

pub const DEFAULT_CRITICAL_PATHS: [&str; 10] = [
    ".ssh/",
    "id_rsa",
    "id_ed25519",
    ".aws/credentials",
    ".config/gcloud",
    ".azure/",
    ".kube/config",
    ".npmrc",
    ".netrc",
    ".docker/config.json",
];

/// A watchlist row: any reference whose path starts with one of `patterns`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiRule {
    pub patterns: Vec<Vec<String>>,
    pub rule_id: RuleId,
    pub severity: Severity,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternRule {
    pub rule_id: RuleId,
    pub severity: Severity,
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    /// Module specifiers that denote the editor API.
    pub api_modules: Vec<String>,
    pub api_watchlist: Vec<ApiRule>,
    pub pattern_rules: Vec<PatternRule>,
    pub critical_path_watchlist: Vec<String>,
    pub network_modules: Vec<String>,
    pub max_parse_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleSetError {
    #[error("rule id {0} appears more than once")]
    DuplicateRule(RuleId),
    #[error("watchlist row {0} has no patterns")]
    EmptyPattern(RuleId),
}

fn api_rule(rule_id: RuleId, patterns: &[&str]) -> ApiRule {
    ApiRule {
        patterns: patterns.iter().map(|p| p.split('.').map(str::to_string).collect()).collect(),
        rule_id,
        severity: rule_id.default_severity(),
        summary: rule_id.summary().to_string(),
    }
}

pub const PATTERN_RULE_IDS: [RuleId; 9] = [
    RuleId::SrcTlsDisable,
    RuleId::SrcSilentInstall,
    RuleId::SrcSilentInstallMaybe,
    RuleId::SrcHiddenTerminal,
    RuleId::SrcCriticalFile,
    RuleId::SrcSettingsMutation,
    RuleId::SrcLocalProxy,
    RuleId::SrcNetCall,
    RuleId::SrcExtDirAccess,
];

impl Default for RuleSet {
    fn default() -> Self {
        use RuleId::*;
        Self {
            api_modules: vec!["vscode".into()],
            api_watchlist: vec![
                api_rule(SrcApiWorkspaceFs, &["workspace.fs"]),
                api_rule(SrcApiFsWatcher, &["workspace.createFileSystemWatcher"]),
                api_rule(SrcApiApplyEdit, &["workspace.applyEdit"]),
                api_rule(SrcApiFindFiles, &["workspace.findFiles"]),
                api_rule(SrcApiActiveEditor, &["window.activeTextEditor"]),
                api_rule(SrcApiCreateTerminal, &["window.createTerminal"]),
                api_rule(SrcApiWebview, &["window.createWebviewPanel"]),
                api_rule(SrcApiAuthSession, &["authentication.getSession"]),
                api_rule(SrcApiGetExtension, &["extensions.getExtension"]),
                api_rule(SrcApiOpenExternal, &["env.openExternal"]),
                api_rule(SrcApiClipboard, &["env.clipboard"]),
                api_rule(
                    SrcApiEnvIdentity,
                    &["env.sessionId", "env.machineId", "env.uiKind", "env.remoteName", "env.appRoot", "env.appHost"],
                ),
            ],
            pattern_rules: PATTERN_RULE_IDS
                .iter()
                .map(|&rule_id| PatternRule { rule_id, severity: rule_id.default_severity(), enabled: true })
                .collect(),
            critical_path_watchlist: DEFAULT_CRITICAL_PATHS.iter().map(|s| s.to_string()).collect(),
            network_modules: DEFAULT_NETWORK_MODULES.iter().map(|s| s.to_string()).collect(),
            max_parse_bytes: DEFAULT_MAX_PARSE_BYTES,
        }
    }
}

impl RuleSet {
    pub fn validate(&self) -> Result<(), RuleSetError> {
        let mut seen = std::collections::BTreeSet::new();
        for r in &self.api_watchlist {
            if r.patterns.is_empty() || r.patterns.iter().any(Vec::is_empty) {
                return Err(RuleSetError::EmptyPattern(r.rule_id));
            }
            if !seen.insert(r.rule_id) {
                return Err(RuleSetError::DuplicateRule(r.rule_id));
            }
        }
        for r in &self.pattern_rules {
            if !seen.insert(r.rule_id) {
                return Err(RuleSetError::DuplicateRule(r.rule_id));
            }
        }
        Ok(())
    }

    pub fn severity(&self, rule: RuleId) -> Severity {
        self.pattern_rules
            .iter()
            .find(|r| r.rule_id == rule)
            .map(|r| r.severity)
            .or_else(|| self.api_watchlist.iter().find(|r| r.rule_id == rule).map(|r| r.severity))
            .unwrap_or(rule.default_severity())
    }

    pub fn enabled(&self, rule: RuleId) -> bool {
        self.pattern_rules.iter().find(|r| r.rule_id == rule).is_none_or(|r| r.enabled)
    }
}

/// A decoded source file and its parse outcome.
#[derive(Debug, Clone)]
pub struct SourceUnit {
    pub path: String,
    pub text: String,
    pub lossy: bool,
    pub tree: Result<SyntaxTree, ParseError>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SourceError {
    #[error("{path}: {size} bytes exceeds the parse limit of {limit}")]
    FileTooLarge { path: String, size: u64, limit: u64 },
}

/// Decodes and parses one file. Parse failures are kept in the unit so the
/// caller can fall back to line matching.
pub fn parse_source(path: &str, bytes: &[u8], max_parse_bytes: u64) -> Result<SourceUnit, SourceError> {
    if bytes.len() as u64 > max_parse_bytes {
        return Err(SourceError::FileTooLarge { path: path.to_string(), size: bytes.len() as u64, limit: max_parse_bytes });
    }
    let decoded = js::decode(bytes);
    let tree = js::parse(&decoded.text);
    Ok(SourceUnit { path: path.to_string(), text: decoded.text, lossy: decoded.lossy, tree })
}

const EXCERPT_CHARS: usize = 160;

/// Source text from `column` to the end of the line, at most 160 characters.
pub(crate) fn excerpt(lines: &LineIndex, line: u32, column: u32) -> String {
    let text = lines.line_text(line);
    let s: String = text.chars().skip(column.saturating_sub(1) as usize).take(EXCERPT_CHARS).collect();
    let s = s.trim_end();
    if s.is_empty() {
        text.trim().chars().take(EXCERPT_CHARS).collect()
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileOutcome {
    Parsed,
    Fallback,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileStats {
    pub path: String,
    pub size: u64,
    pub outcome: FileOutcome,
    pub lossy: bool,
    pub nodes: usize,
    pub api_references: usize,
    pub findings: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanStats {
    pub files: usize,
    pub parsed: usize,
    pub fallback: usize,
    pub skipped: usize,
    pub lossy: usize,
    pub nodes: usize,
    pub api_references: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceScanResult {
    pub identity: ExtensionIdentity,
    pub findings: Vec<Finding>,
    pub stats: ScanStats,
    pub files: Vec<FileStats>,
}

/// Scans one file; `bytes` is `None` when the content was not retained.
pub fn scan_file(
    path: &str,
    size: u64,
    bytes: Option<&[u8]>,
    rules: &RuleSet,
    subject: &ExtensionIdentity,
) -> (Vec<Finding>, FileStats) {
    let mut stats = FileStats {
        path: path.to_string(),
        size,
        outcome: FileOutcome::Skipped,
        lossy: false,
        nodes: 0,
        api_references: 0,
        findings: 0,
    };
    let unit = match bytes.map(|b| parse_source(path, b, rules.max_parse_bytes)) {
        Some(Ok(unit)) if size <= rules.max_parse_bytes => unit,
        _ => {
            let f = Finding::new(RuleId::SrcSkipped, subject, format!("{path}: {size} bytes, limit {}", rules.max_parse_bytes))
                .at(Location::file(path))
                .with_severity(rules.severity(RuleId::SrcSkipped))
                .with_meta("size", size.to_string());
            stats.findings = 1;
            return (vec![f], stats);
        }
    };
    let mut findings = Vec::new();
    if unit.lossy {
        stats.lossy = true;
        findings.push(
            Finding::new(RuleId::SrcLossyDecode, subject, format!("{path}: invalid UTF-8 replaced"))
                .at(Location::file(path))
                .with_severity(rules.severity(RuleId::SrcLossyDecode)),
        );
    }
    let lines = LineIndex::new(&unit.text);
    match &unit.tree {
        Ok(tree) => {
            stats.outcome = FileOutcome::Parsed;
            stats.nodes = tree.nodes.len();
            let refs = resolve_api_references(tree, &rules.api_modules);
            stats.api_references = refs.len();
            findings.extend(detect_api_usage(&refs, rules, subject, &unit, &lines));
            findings.extend(detect_patterns(tree, rules, subject, &unit, &lines));
        }
        Err(e) => {
            stats.outcome = FileOutcome::Fallback;
            findings.push(
                Finding::new(RuleId::SrcUnparseable, subject, format!("{path}: {e}"))
                    .at(Location::file(path))
                    .with_severity(rules.severity(RuleId::SrcUnparseable))
                    .with_meta("line", e.line.to_string())
                    .with_meta("column", e.column.to_string()),
            );
            findings.extend(fallback_scan(&unit, rules, subject));
        }
    }
    stats.findings = findings.len();
    (findings, stats)
}

/// Runs the source rules over every ECMAScript entry of a package.
pub fn scan_extension(package: &ExtensionPackage, rules: &RuleSet, mode: Parallelism) -> SourceScanResult {
    let subject = &package.identity;
    let per_file = par::map(mode, &package.sources, |s| scan_file(&s.path, s.size, s.bytes.as_deref(), rules, subject));
    let mut findings = Vec::new();
    let mut files = Vec::with_capacity(per_file.len());
    let mut stats = ScanStats::default();
    for (f, st) in per_file {
        findings.extend(f);
        stats.files += 1;
        match st.outcome {
            FileOutcome::Parsed => stats.parsed += 1,
            FileOutcome::Fallback => stats.fallback += 1,
            FileOutcome::Skipped => stats.skipped += 1,
        }
        stats.lossy += usize::from(st.lossy);
        stats.nodes += st.nodes;
        stats.api_references += st.api_references;
        files.push(st);
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    sort_findings(&mut findings);
    SourceScanResult { identity: subject.clone(), findings, stats, files }
}

#[cfg(test)]
mod tests;

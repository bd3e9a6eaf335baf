//! Findings and the closed rule catalog.
//!
//! Every detection in the scanner is reported as a [`Finding`] carrying a
//! [`RuleId`]. The catalog is an enum so an id outside it cannot be
//! constructed, serialized, or parsed back.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::identity::ExtensionIdentity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Low,
    Medium,
    High,
    Critical,
}

impl Severity {
    pub const ALL: [Severity; 5] = [
        Severity::Info,
        Severity::Low,
        Severity::Medium,
        Severity::High,
        Severity::Critical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Info => "info",
            Severity::Low => "low",
            Severity::Medium => "medium",
            Severity::High => "high",
            Severity::Critical => "critical",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Severity::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown severity `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    MaliciousIndicator,
    Vulnerable,
    Privacy,
    MarketMisuse,
    Hygiene,
}

macro_rules! rule_catalog {
    ($( $variant:ident => $id:literal, $cat:ident, $sev:ident, $summary:literal; )*) => {
        /// Stable rule identifiers. This is the complete catalog.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum RuleId {
            $( $variant, )*
        }

        impl RuleId {
            pub const ALL: &'static [RuleId] = &[ $( RuleId::$variant, )* ];

            pub fn as_str(self) -> &'static str {
                match self { $( RuleId::$variant => $id, )* }
            }

            pub fn category(self) -> Category {
                match self { $( RuleId::$variant => Category::$cat, )* }
            }

            /// Severity used when no policy override applies.
            pub fn default_severity(self) -> Severity {
                match self { $( RuleId::$variant => Severity::$sev, )* }
            }

            pub fn summary(self) -> &'static str {
                match self { $( RuleId::$variant => $summary, )* }
            }
        }
    };
}

rule_catalog! {
    PkgIdMismatch => "PKG-ID-MISMATCH", Hygiene, Low,
        "archive metadata identity differs from the manifest identity";

    ManPackInstall => "MAN-PACK-INSTALL", MaliciousIndicator, Medium,
        "extensionPack installs other extensions without user consent";
    ManDepInstall => "MAN-DEP-INSTALL", MaliciousIndicator, Medium,
        "extensionDependencies installs other extensions without user consent";
    ManUntrustedWs => "MAN-UNTRUSTED-WS", MaliciousIndicator, Medium,
        "extension opts in to running in untrusted workspaces";
    ManUntrustedWsLimited => "MAN-UNTRUSTED-WS-LIMITED", Hygiene, Info,
        "extension declares limited support for untrusted workspaces";
    ManNoRepo => "MAN-NO-REPO", MarketMisuse, Low,
        "extension is published without a repository";
    ManNetDep => "MAN-NET-DEP", Privacy, Info,
        "manifest declares a network-capable dependency";
    ManOversized => "MAN-OVERSIZED", MarketMisuse, Medium,
        "package size exceeds the configured maximum";
    ManBundledBinary => "MAN-BUNDLED-BINARY", MarketMisuse, Medium,
        "package bundles a native executable or nested archive";
    ManBundledModules => "MAN-BUNDLED-MODULES", MarketMisuse, Low,
        "package bundles an unusually large node_modules tree";

    SrcApiWorkspaceFs => "SRC-API-WORKSPACE-FS", Privacy, Low,
        "workspace.fs can read and write arbitrary files";
    SrcApiFsWatcher => "SRC-API-FS-WATCHER", Privacy, Info,
        "workspace.createFileSystemWatcher monitors file system changes";
    SrcApiApplyEdit => "SRC-API-APPLY-EDIT", Privacy, Info,
        "workspace.applyEdit modifies files in the workspace";
    SrcApiFindFiles => "SRC-API-FIND-FILES", Privacy, Info,
        "workspace.findFiles enumerates workspace files";
    SrcApiActiveEditor => "SRC-API-ACTIVE-EDITOR", Privacy, Info,
        "window.activeTextEditor exposes the active editor content";
    SrcApiCreateTerminal => "SRC-API-CREATE-TERMINAL", Privacy, Low,
        "window.createTerminal opens a terminal with host access";
    SrcApiWebview => "SRC-API-WEBVIEW", Privacy, Info,
        "window.createWebviewPanel renders arbitrary content";
    SrcApiAuthSession => "SRC-API-AUTH-SESSION", Privacy, Low,
        "authentication.getSession accesses authentication sessions";
    SrcApiGetExtension => "SRC-API-GET-EXTENSION", Privacy, Info,
        "extensions.getExtension inspects other installed extensions";
    SrcApiOpenExternal => "SRC-API-OPEN-EXTERNAL", Privacy, Info,
        "env.openExternal opens URLs or files in external applications";
    SrcApiClipboard => "SRC-API-CLIPBOARD", Privacy, Low,
        "env.clipboard reads or writes the clipboard";
    SrcApiEnvIdentity => "SRC-API-ENV-IDENTITY", Privacy, Medium,
        "env identity values expose system and session information";

    SrcTlsDisable => "SRC-TLS-DISABLE", MaliciousIndicator, Critical,
        "NODE_TLS_REJECT_UNAUTHORIZED is set to 0, disabling certificate validation";
    SrcSilentInstall => "SRC-SILENT-INSTALL", MaliciousIndicator, High,
        "executeCommand invokes workbench.extensions.installExtension";
    SrcSilentInstallMaybe => "SRC-SILENT-INSTALL-MAYBE", MaliciousIndicator, Medium,
        "executeCommand is invoked with a non-literal command id";
    SrcHiddenTerminal => "SRC-HIDDEN-TERMINAL", MaliciousIndicator, High,
        "createTerminal is called with a hidden-from-user option";
    SrcCriticalFile => "SRC-CRITICAL-FILE", MaliciousIndicator, Critical,
        "a credential or private-key path reaches a file-read call";
    SrcSettingsMutation => "SRC-SETTINGS-MUTATION", MaliciousIndicator, Medium,
        "editor settings are modified programmatically";
    SrcLocalProxy => "SRC-LOCAL-PROXY", MaliciousIndicator, High,
        "a local server is created from an http/https/net module";
    SrcNetCall => "SRC-NET-CALL", Privacy, Info,
        "a network request is made through a network-capable package";
    SrcExtDirAccess => "SRC-EXT-DIR-ACCESS", MaliciousIndicator, High,
        "source references the installed-extensions directory";
    SrcUnparseable => "SRC-UNPARSEABLE", Hygiene, Info,
        "file could not be parsed; token-level fallback scan applied";
    SrcSkipped => "SRC-SKIPPED", Hygiene, Info,
        "file exceeds the maximum parse size and was skipped";
    SrcLossyDecode => "SRC-LOSSY-DECODE", Hygiene, Info,
        "file is not valid UTF-8; decoded with replacement characters";

    DepCve => "DEP-CVE", Vulnerable, Medium,
        "dependency matches a known vulnerability";
    DepRangeUnparseable => "DEP-RANGE-UNPARSEABLE", Hygiene, Info,
        "dependency version range could not be parsed";

    GraphSelfEdge => "GRAPH-SELF-EDGE", Hygiene, Info,
        "extension declares itself as an install target";
    GraphMalformedTarget => "GRAPH-MALFORMED-TARGET", Hygiene, Info,
        "install target is not a well-formed extension id";
    GraphCycle => "GRAPH-CYCLE", Hygiene, Low,
        "extensions install each other in a cycle";
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RuleId {
    type Err = UnknownRuleId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleId::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| UnknownRuleId(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("rule id `{0}` is not in the catalog")]
pub struct UnknownRuleId(pub String);

impl Serialize for RuleId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for RuleId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    pub path: String,
    pub line: u32,
    pub column: u32,
}

impl Location {
    pub fn new(path: impl Into<String>, line: u32, column: u32) -> Self {
        Self {
            path: path.into(),
            line,
            column,
        }
    }

    /// A location that names a file but no position in it.
    pub fn file(path: impl Into<String>) -> Self {
        Self::new(path, 0, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule_id: RuleId,
    pub category: Category,
    pub severity: Severity,
    pub subject: ExtensionIdentity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<Location>,
    pub evidence: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl Finding {
    /// Builds a finding with the rule's catalog category and default severity.
    ///
    /// Empty evidence is replaced by the rule summary so every finding
    /// carries a non-empty evidence string.
    pub fn new(rule_id: RuleId, subject: &ExtensionIdentity, evidence: impl Into<String>) -> Self {
        let mut evidence = evidence.into();
        if evidence.trim().is_empty() {
            evidence = rule_id.summary().to_string();
        }
        Self {
            rule_id,
            category: rule_id.category(),
            severity: rule_id.default_severity(),
            subject: subject.clone(),
            location: None,
            evidence,
            metadata: BTreeMap::new(),
        }
    }

    pub fn at(mut self, location: Location) -> Self {
        self.location = Some(location);
        self
    }

    pub fn with_severity(mut self, severity: Severity) -> Self {
        self.severity = severity;
        self
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    fn sort_key(&self) -> (&'static str, Option<&Location>, &str) {
        (self.rule_id.as_str(), self.location.as_ref(), self.evidence.as_str())
    }
}

/// Sorts findings by rule id, then location, then evidence.
pub fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| {
        a.sort_key()
            .cmp(&b.sort_key())
            .then_with(|| a.metadata.cmp(&b.metadata))
            .then_with(|| a.subject.cmp(&b.subject))
            .then_with(|| a.severity.cmp(&b.severity))
    });
}

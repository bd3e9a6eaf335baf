//! The policy file: scoring weights, tier cutoffs, size limits, rule
//! overrides, and intel and marketplace settings, all in one TOML document.
//!
//! ```toml
//! [scoring]
//! cap = 100
//! suspicious_at = 15
//! high_risk_at = 50
//! [scoring.weights]
//! info = 1
//! low = 5
//! medium = 15
//! high = 30
//! critical = 50
//!
//! [sizes]
//! max_total = 104857600
//! max_modules = 20971520
//!
//! [rules]
//! disabled = ["SRC-NET-CALL"]
//! network_packages = ["axios", "node-fetch"]
//! [rules.severity]
//! "MAN-NO-REPO" = "info"
//!
//! [intel]
//! threshold = 4
//!
//! [market]
//! rate_per_second = 2
//! ```
//!
//! Every section and key is optional.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finding::{Finding, RuleId, Severity};
use crate::intel::IntelConfig;
use crate::manifest_rules::{ManifestPolicy, SizePolicy};
use crate::market::MarketConfig;
use crate::source::RuleSet;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy file {path}: {message}")]
    Unreadable { path: String, message: String },
    #[error("policy: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeverityWeights {
    pub info: u32,
    pub low: u32,
    pub medium: u32,
    pub high: u32,
    pub critical: u32,
}

impl Default for SeverityWeights {
    fn default() -> Self {
        Self { info: 1, low: 5, medium: 15, high: 30, critical: 50 }
    }
}

impl SeverityWeights {
    pub fn weight(&self, s: Severity) -> u32 {
        match s {
            Severity::Info => self.info,
            Severity::Low => self.low,
            Severity::Medium => self.medium,
            Severity::High => self.high,
            Severity::Critical => self.critical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringPolicy {
    pub weights: SeverityWeights,
    pub cap: u32,
    /// Lowest score in the suspicious tier.
    pub suspicious_at: u32,
    /// Lowest score in the high-risk tier.
    pub high_risk_at: u32,
}

impl Default for ScoringPolicy {
    fn default() -> Self {
        Self { weights: SeverityWeights::default(), cap: 100, suspicious_at: 15, high_risk_at: 50 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RulePolicy {
    pub disabled: BTreeSet<RuleId>,
    pub severity: BTreeMap<RuleId, Severity>,
    pub network_packages: Option<Vec<String>>,
    pub critical_paths: Option<Vec<String>>,
    pub api_modules: Option<Vec<String>>,
    pub max_parse_bytes: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Policy {
    pub scoring: ScoringPolicy,
    pub sizes: SizePolicy,
    pub rules: RulePolicy,
    pub intel: IntelConfig,
    pub market: MarketConfig,
}

impl Policy {
    pub fn parse(text: &str) -> Result<Self, PolicyError> {
        let p: Policy = toml::from_str(text).map_err(|e| PolicyError::Invalid(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PolicyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PolicyError::Unreadable { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text).map_err(|e| PolicyError::Unreadable { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let s = &self.scoring;
        if !(s.suspicious_at <= s.high_risk_at && s.high_risk_at <= s.cap) {
            return Err(PolicyError::Invalid(format!(
                "tier cutoffs must satisfy suspicious_at <= high_risk_at <= cap (got {}, {}, {})",
                s.suspicious_at, s.high_risk_at, s.cap
            )));
        }
        self.rule_set().validate().map_err(|e| PolicyError::Invalid(e.to_string()))
    }

    pub fn rule_set(&self) -> RuleSet {
        let mut rs = RuleSet::default();
        let r = &self.rules;
        if let Some(v) = &r.network_packages {
            rs.network_modules = v.clone();
        }
        if let Some(v) = &r.critical_paths {
            rs.critical_path_watchlist = v.clone();
        }
        if let Some(v) = &r.api_modules {
            rs.api_modules = v.clone();
        }
        if let Some(v) = r.max_parse_bytes {
            rs.max_parse_bytes = v;
        }
        rs.api_watchlist.retain(|a| !r.disabled.contains(&a.rule_id));
        for a in &mut rs.api_watchlist {
            if let Some(s) = r.severity.get(&a.rule_id) {
                a.severity = *s;
            }
        }
        for p in &mut rs.pattern_rules {
            p.enabled = !r.disabled.contains(&p.rule_id);
            if let Some(s) = r.severity.get(&p.rule_id) {
                p.severity = *s;
            }
        }
        rs
    }

    pub fn manifest_policy(&self) -> ManifestPolicy {
        let mut m = ManifestPolicy { sizes: self.sizes, ..Default::default() };
        if let Some(v) = &self.rules.network_packages {
            m.network_packages = v.clone();
        }
        m
    }

    /// Drops disabled rules and applies severity overrides.
    pub fn apply(&self, findings: Vec<Finding>) -> Vec<Finding> {
        findings
            .into_iter()
            .filter(|f| !self.rules.disabled.contains(&f.rule_id))
            .map(|f| match self.rules.severity.get(&f.rule_id) {
                Some(s) => f.with_severity(*s),
                None => f,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::ExtensionIdentity;

    #[test]
    fn empty_policy_is_the_default() {
        assert_eq!(Policy::parse("").unwrap(), Policy::default());
        assert_eq!(Policy::default().rule_set(), RuleSet::default());
    }

    #[test]
    fn overrides_reach_rules_and_findings() {
        let p = Policy::parse(
            r#"
            [scoring.weights]
            info = 2
            [rules]
            disabled = ["SRC-NET-CALL", "SRC-API-CLIPBOARD"]
            network_packages = ["got"]
            [rules.severity]
            "MAN-NO-REPO" = "high"
            "SRC-TLS-DISABLE" = "medium"
            [intel]
            threshold = 6
            [market]
            workers = 2
            "#,
        )
        .unwrap();
        assert_eq!(p.scoring.weights.info, 2);
        assert_eq!(p.scoring.weights.critical, 50);
        assert_eq!(p.intel.threshold, 6);
        assert_eq!(p.market.workers, 2);
        let rs = p.rule_set();
        assert!(!rs.enabled(RuleId::SrcNetCall));
        assert!(rs.api_watchlist.iter().all(|a| a.rule_id != RuleId::SrcApiClipboard));
        assert_eq!(rs.severity(RuleId::SrcTlsDisable), Severity::Medium);
        assert_eq!(p.manifest_policy().network_packages, ["got"]);
        let who = ExtensionIdentity::unknown();
        let out = p.apply(vec![Finding::new(RuleId::ManNoRepo, &who, ""), Finding::new(RuleId::SrcNetCall, &who, "")]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].severity, Severity::High);
    }

    #[test]
    fn bad_policies_are_rejected() {
        assert!(Policy::parse("[rules]\ndisabled = [\"SRC-MADE-UP\"]").is_err());
        assert!(Policy::parse("[scoring]\nsuspicious_at = 60\nhigh_risk_at = 50").is_err());
        assert!(Policy::parse("[nonsense]\nx = 1").is_err());
        assert!(matches!(Policy::load("/nonexistent/policy.toml"), Err(PolicyError::Unreadable { .. })));
    }
}

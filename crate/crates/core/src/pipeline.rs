//! End-to-end static scan: read, manifest and inventory rules, source scan,
//! dependency audit, optional intel lookups, policy and scoring.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deps::{self, VulnDatabase};
use crate::finding::sort_findings;
use crate::graph::GraphSubject;
use crate::intel::{classify, filter_indicators, Indicator, IntelClient, ThreatClass, TopDomainList};
use crate::manifest_rules::{analyze_inventory, analyze_manifest, ManifestPolicy};
use crate::market::{Store, LEDGER_FILE, LISTINGS_FILE};
use crate::market::{sort_versions_desc, MarketError};
use crate::package::{read_package, ExtensionPackage, ReadError};
use crate::par::{self, Parallelism};
use crate::policy::Policy;
use crate::report::{score, ExtensionReport, IntelEntry, SCHEMA_VERSION};
use crate::source::{scan_extension, RuleSet, ScanStats};

static URL_HOST: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:https?|wss?|ftp)://(?:[^/\s@'\x22`]*@)?([a-z0-9][a-z0-9.-]*[a-z0-9])").unwrap());

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("{source_name}: {error}")]
    Read { source_name: String, error: ReadError },
    #[error("{source_name}: {message}")]
    Io { source_name: String, message: String },
}

/// One package to scan, read lazily from disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub path: PathBuf,
    /// Label used in errors; the file path or `id@version`.
    pub label: String,
    pub install_count: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutput {
    pub report: ExtensionReport,
    pub subject: GraphSubject,
    pub stats: ScanStats,
}

#[derive(Debug, Default)]
pub struct CorpusScan {
    /// In item order, failures skipped.
    pub reports: Vec<ExtensionReport>,
    pub subjects: Vec<GraphSubject>,
    pub stats: ScanStats,
    pub failures: Vec<ScanError>,
}

impl CorpusScan {
    pub fn installs(&self) -> BTreeMap<String, u64> {
        self.reports.iter().filter_map(|r| r.install_count.map(|n| (r.identity.canonical_id(), n))).collect()
    }
}

pub struct Scanner {
    policy: Policy,
    rules: RuleSet,
    manifest_policy: ManifestPolicy,
    db: VulnDatabase,
    intel: Option<(Arc<IntelClient>, TopDomainList)>,
    mode: Parallelism,
}

/// Network hosts named in URL literals of retained sources, deduplicated.
pub fn source_hosts(package: &ExtensionPackage) -> Vec<String> {
    let mut hosts = BTreeSet::new();
    for s in &package.sources {
        if let Some(bytes) = &s.bytes {
            let text = String::from_utf8_lossy(bytes);
            for c in URL_HOST.captures_iter(&text) {
                let h = c[1].to_ascii_lowercase();
                if h.contains('.') {
                    hosts.insert(h);
                }
            }
        }
    }
    hosts.into_iter().collect()
}

impl Scanner {
    pub fn new(policy: Policy, db: VulnDatabase) -> Self {
        Self {
            rules: policy.rule_set(),
            manifest_policy: policy.manifest_policy(),
            policy,
            db,
            intel: None,
            mode: Parallelism::default(),
        }
    }

    pub fn with_intel(mut self, client: Arc<IntelClient>, allowlist: TopDomainList) -> Self {
        self.intel = Some((client, allowlist));
        self
    }

    pub fn with_mode(mut self, mode: Parallelism) -> Self {
        self.mode = mode;
        self
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn mode(&self) -> Parallelism {
        self.mode
    }

    fn lookup_intel(&self, package: &ExtensionPackage) -> (Vec<IntelEntry>, Vec<String>) {
        let Some((client, allowlist)) = &self.intel else {
            return (Vec::new(), Vec::new());
        };
        let mut indicators = Vec::new();
        let mut errors = Vec::new();
        match Indicator::file_hash(&package.package_sha256) {
            Ok(i) => indicators.push(i),
            Err(e) => errors.push(e.to_string()),
        }
        for host in filter_indicators(&source_hosts(package), allowlist) {
            if let Ok(i) = Indicator::infer(&host) {
                indicators.push(i);
            }
        }
        let mut entries = Vec::new();
        for i in indicators {
            match client.lookup(&i) {
                Ok(v) => entries.push(IntelEntry {
                    class: classify(&v, self.policy.intel.threshold),
                    engines_positive: v.engines_positive,
                    engines_total: v.engines_total,
                    backend: v.backend,
                    indicator: i,
                }),
                Err(e) => errors.push(format!("{i}: {e}")),
            }
        }
        (entries, errors)
    }

    pub fn scan_package(&self, package: &ExtensionPackage, install_count: Option<u64>) -> ScanOutput {
        let id = &package.identity;
        let mut findings = package.findings.clone();
        findings.extend(analyze_manifest(&package.manifest, &self.manifest_policy));
        findings.extend(analyze_inventory(&package.inventory, &self.policy.sizes, id));
        let source = scan_extension(package, &self.rules, self.mode);
        findings.extend(source.findings);
        let mut findings = self.policy.apply(findings);
        sort_findings(&mut findings);
        let mut dep_findings = self.policy.apply(deps::audit(&package.manifest, &package.inventory, &self.db));
        sort_findings(&mut dep_findings);

        let (intel, intel_errors) = self.lookup_intel(package);
        let worst = intel.iter().map(|e| e.class).max();
        let risk = score(findings.iter().chain(&dep_findings), worst, &self.policy.scoring);

        let mut for_graph = findings.clone();
        for_graph.extend(dep_findings.iter().cloned());
        let subject = GraphSubject::from_findings(
            id.clone(),
            package.manifest.extension_pack.clone(),
            package.manifest.extension_dependencies.clone(),
            &for_graph,
            worst == Some(ThreatClass::Malicious),
        );
        let report = ExtensionReport {
            schema_version: SCHEMA_VERSION,
            identity: id.clone(),
            package_sha256: package.package_sha256.clone(),
            install_count,
            findings,
            dep_findings,
            intel,
            intel_errors,
            risk,
        };
        ScanOutput { report, subject, stats: source.stats }
    }

    pub fn scan_bytes(&self, bytes: &[u8], install_count: Option<u64>) -> Result<ScanOutput, ReadError> {
        Ok(self.scan_package(&read_package(bytes)?, install_count))
    }

    pub fn scan_item(&self, item: &CorpusItem) -> Result<ScanOutput, ScanError> {
        let bytes = std::fs::read(&item.path)
            .map_err(|e| ScanError::Io { source_name: item.label.clone(), message: e.to_string() })?;
        self.scan_bytes(&bytes, item.install_count)
            .map_err(|error| ScanError::Read { source_name: item.label.clone(), error })
    }

    /// Scans every item; packages are spread over the worker pool and each
    /// package's sources are scanned on the calling worker.
    pub fn scan_corpus(&self, items: &[CorpusItem]) -> CorpusScan {
        let inner = Scanner {
            policy: self.policy.clone(),
            rules: self.rules.clone(),
            manifest_policy: self.manifest_policy.clone(),
            db: self.db.clone(),
            intel: self.intel.clone(),
            mode: Parallelism::Sequential,
        };
        let results = par::map(self.mode, items, |item| inner.scan_item(item));
        let mut out = CorpusScan::default();
        for r in results {
            match r {
                Ok(o) => {
                    let s = &mut out.stats;
                    s.files += o.stats.files;
                    s.parsed += o.stats.parsed;
                    s.fallback += o.stats.fallback;
                    s.skipped += o.stats.skipped;
                    s.lossy += o.stats.lossy;
                    s.nodes += o.stats.nodes;
                    s.api_references += o.stats.api_references;
                    out.reports.push(o.report);
                    out.subjects.push(o.subject);
                }
                Err(e) => out.failures.push(e),
            }
        }
        out
    }
}

/// Items for every package in a download store. With `latest_only`, one
/// item per extension: its newest stored version. Install counts come from
/// the store's listing snapshot.
pub fn store_items(root: &Path, latest_only: bool) -> Result<Vec<CorpusItem>, MarketError> {
    if !root.join(LEDGER_FILE).exists() && !root.join(LISTINGS_FILE).exists() {
        return Err(MarketError::Store { path: root.display().to_string(), message: "not a package store".into() });
    }
    let store = Store::open(root)?;
    let installs: BTreeMap<String, u64> =
        store.listings()?.into_iter().map(|l| (l.identity.canonical_id(), l.install_count)).collect();
    let mut by_id: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for e in store.entries()? {
        by_id.entry(e.id).or_default().insert(e.version, e.sha256);
    }
    let mut items = Vec::new();
    for (id, versions) in by_id {
        let ordered = sort_versions_desc(versions.keys().cloned().collect());
        let take = if latest_only { 1 } else { ordered.len() };
        for v in ordered.into_iter().take(take) {
            items.push(CorpusItem {
                path: store.blob_path(&versions[&v]),
                label: format!("{id}@{v}"),
                install_count: installs.get(&id).copied(),
            });
        }
    }
    Ok(items)
}

/// Items for `.vsix` files: each path that is a file, plus every `*.vsix`
/// directly inside each path that is a directory, sorted.
pub fn file_items(paths: &[PathBuf]) -> std::io::Result<Vec<CorpusItem>> {
    let mut found = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x.eq_ignore_ascii_case("vsix")))
                .collect();
            inner.sort();
            found.extend(inner);
        } else {
            found.push(p.clone());
        }
    }
    Ok(found
        .into_iter()
        .map(|path| CorpusItem { label: path.display().to_string(), path, install_count: None })
        .collect())
}

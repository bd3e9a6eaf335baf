//! Findings derived from the manifest and the file inventory alone.

use serde::{Deserialize, Serialize};

use crate::finding::{sort_findings, Finding, Location, RuleId};
use crate::identity::ExtensionIdentity;
use crate::package::{EntryKind, ExtensionManifest, PackageInventory, UntrustedSupport};
use crate::source::DEFAULT_NETWORK_MODULES;

pub const MANIFEST_FILE: &str = "package.json";
pub const DEFAULT_MAX_TOTAL: u64 = 100 * 1024 * 1024;
pub const DEFAULT_MAX_MODULES: u64 = 20 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SizePolicy {
    pub max_total: u64,
    pub max_modules: u64,
}

impl Default for SizePolicy {
    fn default() -> Self {
        Self { max_total: DEFAULT_MAX_TOTAL, max_modules: DEFAULT_MAX_MODULES }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestPolicy {
    pub network_packages: Vec<String>,
    pub sizes: SizePolicy,
}

impl Default for ManifestPolicy {
    fn default() -> Self {
        Self {
            network_packages: DEFAULT_NETWORK_MODULES.iter().map(|s| s.to_string()).collect(),
            sizes: SizePolicy::default(),
        }
    }
}

/// Position of `"key"` in the manifest text, for locating findings.
fn key_location(manifest: &ExtensionManifest, key: &str) -> Location {
    let needle = format!("\"{key}\"");
    match manifest.source.find(&needle) {
        Some(at) => {
            let before = &manifest.source[..at];
            let line = before.matches('\n').count() as u32 + 1;
            let col = before.rsplit('\n').next().unwrap_or("").chars().count() as u32 + 1;
            Location::new(MANIFEST_FILE, line, col)
        }
        None => Location::file(MANIFEST_FILE),
    }
}

fn list_evidence(key: &str, ids: &[String]) -> String {
    format!("{key}: [{}]", ids.iter().map(|i| format!("\"{i}\"")).collect::<Vec<_>>().join(", "))
}

pub fn analyze_manifest(manifest: &ExtensionManifest, policy: &ManifestPolicy) -> Vec<Finding> {
    let subject = &manifest.identity;
    let mut out = Vec::new();
    if !manifest.extension_pack.is_empty() {
        out.push(
            Finding::new(RuleId::ManPackInstall, subject, list_evidence("extensionPack", &manifest.extension_pack))
                .at(key_location(manifest, "extensionPack"))
                .with_meta("targets", manifest.extension_pack.join(",")),
        );
    }
    if !manifest.extension_dependencies.is_empty() {
        out.push(
            Finding::new(
                RuleId::ManDepInstall,
                subject,
                list_evidence("extensionDependencies", &manifest.extension_dependencies),
            )
            .at(key_location(manifest, "extensionDependencies"))
            .with_meta("targets", manifest.extension_dependencies.join(",")),
        );
    }
    match manifest.untrusted_workspaces {
        UntrustedSupport::True => out.push(
            Finding::new(RuleId::ManUntrustedWs, subject, "capabilities.untrustedWorkspaces.supported: true")
                .at(key_location(manifest, "untrustedWorkspaces")),
        ),
        UntrustedSupport::Limited => out.push(
            Finding::new(RuleId::ManUntrustedWsLimited, subject, "capabilities.untrustedWorkspaces.supported: \"limited\"")
                .at(key_location(manifest, "untrustedWorkspaces")),
        ),
        UntrustedSupport::False | UntrustedSupport::Absent => {}
    }
    if !manifest.has_repository() {
        out.push(Finding::new(RuleId::ManNoRepo, subject, "repository.url is missing or empty").at(Location::file(MANIFEST_FILE)));
    }
    for (name, range) in &manifest.dependencies {
        if policy.network_packages.iter().any(|n| n == name) {
            out.push(
                Finding::new(RuleId::ManNetDep, subject, format!("dependencies: \"{name}\": \"{range}\""))
                    .at(key_location(manifest, name))
                    .with_meta("package", name.clone())
                    .with_meta("range", range.clone()),
            );
        }
    }
    sort_findings(&mut out);
    out
}

pub fn analyze_inventory(inventory: &PackageInventory, sizes: &SizePolicy, subject: &ExtensionIdentity) -> Vec<Finding> {
    let mut out = Vec::new();
    if inventory.total_size > sizes.max_total {
        out.push(
            Finding::new(
                RuleId::ManOversized,
                subject,
                format!("package contents total {} bytes (limit {})", inventory.total_size, sizes.max_total),
            )
            .with_meta("total_size", inventory.total_size.to_string()),
        );
    }
    let mut module_entries = 0usize;
    let mut module_bytes = 0u64;
    for e in &inventory.entries {
        match e.kind {
            EntryKind::NativeExecutable | EntryKind::Archive => out.push(
                Finding::new(RuleId::ManBundledBinary, subject, format!("{} ({}, {} bytes)", e.path, kind_label(e.kind), e.size))
                    .at(Location::file(&e.path))
                    .with_meta("kind", kind_label(e.kind))
                    .with_meta("sha256", e.sha256.clone()),
            ),
            EntryKind::NodeModule => {
                module_entries += 1;
                module_bytes += e.size;
            }
            _ => {}
        }
    }
    if module_entries > 0 && module_bytes > sizes.max_modules {
        out.push(
            Finding::new(
                RuleId::ManBundledModules,
                subject,
                format!("{module_entries} node_modules files totalling {module_bytes} bytes (limit {})", sizes.max_modules),
            )
            .with_meta("bytes", module_bytes.to_string())
            .with_meta("files", module_entries.to_string()),
        );
    }
    sort_findings(&mut out);
    out
}

fn kind_label(kind: EntryKind) -> &'static str {
    match kind {
        EntryKind::NativeExecutable => "native-executable",
        EntryKind::Archive => "archive",
        EntryKind::EcmascriptSource => "ecmascript-source",
        EntryKind::Manifest => "manifest",
        EntryKind::NodeModule => "node-module",
        EntryKind::Media => "media",
        EntryKind::Other => "other",
    }
}

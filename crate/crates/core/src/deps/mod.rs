//! Matching declared and bundled npm dependencies against a local
//! vulnerability database.

mod db;
mod range;
mod version;

pub use db::{load_vuln_db, records_from_osv, DbError, VulnDatabase, VulnSeverity, VulnerabilityRecord, DB_HEADER};
pub use range::{parse_range, version_in_range, Comparator, ComparatorSet, Op, RangeUnparseable, VersionRange};
pub use version::{parse_version, PreId, Version, VersionUnparseable};

use crate::finding::{sort_findings, Finding, Location, RuleId};
use crate::manifest_rules::MANIFEST_FILE;
use crate::package::{ExtensionManifest, PackageInventory};

/// Text attached to reports explaining how declared ranges are matched.
pub const INTERSECTION_NOTE: &str = "declared dependency ranges are matched when any version they admit falls in an affected range; \
     this over-approximates what is actually installed";

/// How a DEP-CVE finding was matched.
pub const MATCH_INTERSECTION: &str = "range-intersection";
pub const MATCH_EXACT: &str = "exact-version";

fn cve_finding(
    manifest: &ExtensionManifest,
    record: &VulnerabilityRecord,
    declared: &str,
    origin: &str,
    how: &str,
    location: Location,
) -> Finding {
    Finding::new(
        RuleId::DepCve,
        &manifest.identity,
        format!(
            "{}@{} ({origin}) matches {} affected range \"{}\"",
            record.package_name, declared, record.cve_id, record.affected_range
        ),
    )
    .at(location)
    .with_severity(record.severity.as_severity())
    .with_meta("cve_id", record.cve_id.clone())
    .with_meta("package", record.package_name.clone())
    .with_meta("declared", declared)
    .with_meta("affected_range", record.affected_range.clone())
    .with_meta("origin", origin)
    .with_meta("match", how)
}

fn unparseable(manifest: &ExtensionManifest, package: &str, text: &str, origin: &str, location: Location) -> Finding {
    Finding::new(
        RuleId::DepRangeUnparseable,
        &manifest.identity,
        format!("{package}: \"{text}\" ({origin})"),
    )
    .at(location)
    .with_meta("package", package)
    .with_meta("declared", text)
    .with_meta("origin", origin)
}

/// DEP-CVE findings for declared dependencies (range intersection) and for
/// bundled node modules (exact version), plus DEP-RANGE-UNPARSEABLE for
/// versions that cannot be interpreted.
pub fn audit(manifest: &ExtensionManifest, inventory: &PackageInventory, db: &VulnDatabase) -> Vec<Finding> {
    let mut out = Vec::new();
    for (name, declared) in &manifest.dependencies {
        let loc = Location::file(MANIFEST_FILE);
        let range = match parse_range(declared) {
            Ok(r) => r,
            Err(_) => {
                out.push(unparseable(manifest, name, declared, "dependencies", loc));
                continue;
            }
        };
        for (record, affected) in db.lookup(name) {
            if range.intersects(affected) {
                out.push(cve_finding(manifest, record, declared, "dependencies", MATCH_INTERSECTION, loc.clone()));
            }
        }
    }
    for module in &inventory.bundled_modules {
        let loc = Location::file(&module.manifest_path);
        let version = match parse_version(&module.version) {
            Ok(v) => v,
            Err(_) => {
                out.push(unparseable(manifest, &module.name, &module.version, "bundled", loc));
                continue;
            }
        };
        for (record, affected) in db.lookup(&module.name) {
            if affected.matches(&version) {
                out.push(cve_finding(manifest, record, &module.version, "bundled", MATCH_EXACT, loc.clone()));
            }
        }
    }
    sort_findings(&mut out);
    out
}

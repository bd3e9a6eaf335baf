//! Corpus-wide silent-install graph: who installs whom, chains, and the
//! attribute cross-tabulation over installed extensions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finding::{Finding, RuleId};
use crate::identity::{normalize_extension_id, ExtensionIdentity};

pub const DEFAULT_MIN_CHAIN: usize = 3;
pub const DEFAULT_PATH_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mechanism {
    #[serde(rename = "extensionPack")]
    ExtensionPack,
    #[serde(rename = "extensionDependencies")]
    ExtensionDependencies,
    #[serde(rename = "installExtension-command")]
    InstallCommand,
}

impl Mechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::ExtensionPack => "extensionPack",
            Mechanism::ExtensionDependencies => "extensionDependencies",
            Mechanism::InstallCommand => "installExtension-command",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Mechanism::ExtensionPack, Mechanism::ExtensionDependencies, Mechanism::InstallCommand]
            .into_iter()
            .find(|m| m.as_str() == s)
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Edge between canonical (lowercase `publisher.name`) extension ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstallEdge {
    pub from: String,
    pub to: String,
    pub mechanism: Mechanism,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeAttributes {
    pub has_network: bool,
    pub vt_malicious: bool,
    pub has_cve: bool,
    pub present_in_corpus: bool,
}

/// What the graph needs to know about one scanned extension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSubject {
    pub identity: ExtensionIdentity,
    pub extension_pack: Vec<String>,
    pub extension_dependencies: Vec<String>,
    /// Literal targets of silent-install commands.
    pub install_targets: Vec<String>,
    pub has_network: bool,
    pub vt_malicious: bool,
    pub has_cve: bool,
}

impl GraphSubject {
    /// Derives install targets and flags from upstream findings: literal
    /// SRC-SILENT-INSTALL targets, network use (MAN-NET-DEP, SRC-NET-CALL)
    /// and DEP-CVE.
    pub fn from_findings(
        identity: ExtensionIdentity,
        extension_pack: Vec<String>,
        extension_dependencies: Vec<String>,
        findings: &[Finding],
        vt_malicious: bool,
    ) -> Self {
        let install_targets = findings
            .iter()
            .filter(|f| f.rule_id == RuleId::SrcSilentInstall)
            .filter_map(|f| f.metadata.get("target").cloned())
            .collect();
        let has = |ids: &[RuleId]| findings.iter().any(|f| ids.contains(&f.rule_id));
        Self {
            identity,
            extension_pack,
            extension_dependencies,
            install_targets,
            has_network: has(&[RuleId::ManNetDep, RuleId::SrcNetCall]),
            vt_malicious,
            has_cve: has(&[RuleId::DepCve]),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstallGraph {
    pub nodes: BTreeMap<String, NodeAttributes>,
    pub edges: BTreeSet<InstallEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("`{0}` is not a node of the install graph")]
    UnknownNode(String),
    #[error("edge list line {line}: {message}")]
    EdgeListUnparseable { line: usize, message: String },
}

/// Builds the graph. Identical `(from, to, mechanism)` declarations collapse
/// to one edge; self-edges and malformed targets become hygiene findings.
pub fn build_graph(subjects: &[GraphSubject]) -> (InstallGraph, Vec<Finding>) {
    let mut g = InstallGraph::default();
    let mut notes = Vec::new();
    for s in subjects {
        let from = s.identity.canonical_id();
        let node = g.nodes.entry(from.clone()).or_default();
        node.present_in_corpus = true;
        node.has_network |= s.has_network;
        node.vt_malicious |= s.vt_malicious;
        node.has_cve |= s.has_cve;
    }
    for s in subjects {
        let from = s.identity.canonical_id();
        let declared = [
            (Mechanism::ExtensionPack, &s.extension_pack),
            (Mechanism::ExtensionDependencies, &s.extension_dependencies),
            (Mechanism::InstallCommand, &s.install_targets),
        ];
        for (mechanism, targets) in declared {
            for raw in targets {
                let to = match normalize_extension_id(raw) {
                    Ok(id) => id,
                    Err(_) => {
                        notes.push(
                            Finding::new(RuleId::GraphMalformedTarget, &s.identity, format!("{mechanism}: \"{raw}\""))
                                .with_meta("mechanism", mechanism.as_str())
                                .with_meta("target", raw.clone()),
                        );
                        continue;
                    }
                };
                if to == from {
                    notes.push(
                        Finding::new(RuleId::GraphSelfEdge, &s.identity, format!("{mechanism}: \"{raw}\""))
                            .with_meta("mechanism", mechanism.as_str()),
                    );
                    continue;
                }
                g.nodes.entry(to.clone()).or_default();
                g.edges.insert(InstallEdge { from: from.clone(), to, mechanism });
            }
        }
    }
    notes.extend(cycle_findings(&g, subjects));
    crate::finding::sort_findings(&mut notes);
    notes.dedup();
    (g, notes)
}

impl InstallGraph {
    /// Successor lists over distinct target ids, sorted.
    pub fn adjacency(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut adj: BTreeMap<&str, Vec<&str>> = self.nodes.keys().map(|k| (k.as_str(), Vec::new())).collect();
        for e in &self.edges {
            adj.get_mut(e.from.as_str()).expect("edge endpoints are nodes").push(e.to.as_str());
        }
        for v in adj.values_mut() {
            v.dedup();
        }
        adj
    }

    pub fn installed_by(&self, id: &str) -> Result<BTreeSet<String>, GraphError> {
        let id = id.trim().to_ascii_lowercase();
        if !self.nodes.contains_key(&id) {
            return Err(GraphError::UnknownNode(id));
        }
        Ok(self.edges.iter().filter(|e| e.to == id).map(|e| e.from.clone()).collect())
    }

    /// One edge per line: `from<TAB>to<TAB>mechanism`.
    pub fn to_edge_list(&self) -> String {
        self.edges.iter().map(|e| format!("{}\t{}\t{}\n", e.from, e.to, e.mechanism)).collect()
    }

    pub fn from_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut g = InstallGraph::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: &str| GraphError::EdgeListUnparseable { line: i + 1, message: m.to_string() };
            let cols: Vec<&str> = line.split('\t').collect();
            let [from, to, mech] = cols[..] else { return Err(bad("expected three tab-separated fields")) };
            let mechanism = Mechanism::parse(mech.trim()).ok_or_else(|| bad("unknown mechanism"))?;
            for id in [from, to] {
                g.nodes.entry(id.trim().to_string()).or_default();
            }
            g.edges.insert(InstallEdge { from: from.trim().into(), to: to.trim().into(), mechanism });
        }
        Ok(g)
    }
}

/// Strongly connected components with more than one node, each sorted.
pub fn cycles(graph: &InstallGraph) -> Vec<Vec<String>> {
    let adj = graph.adjacency();
    let ids: Vec<&str> = adj.keys().copied().collect();
    let pos: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let succ: Vec<Vec<usize>> = ids.iter().map(|id| adj[id].iter().map(|t| pos[t]).collect()).collect();

    // Iterative Tarjan.
    let n = ids.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next = 0;
    let mut out = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut work = vec![(root, 0usize)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(top) = work.last_mut() {
            let v = top.0;
            if top.1 < succ[v].len() {
                let w = succ[v][top.1];
                top.1 += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                work.pop();
                if let Some(&(parent, _)) = work.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("component on stack");
                        on_stack[w] = false;
                        comp.push(ids[w].to_string());
                        if w == v {
                            break;
                        }
                    }
                    if comp.len() > 1 {
                        comp.sort();
                        out.push(comp);
                    }
                }
            }
        }
    }
    out.sort();
    out
}

fn cycle_findings(graph: &InstallGraph, subjects: &[GraphSubject]) -> Vec<Finding> {
    cycles(graph)
        .into_iter()
        .map(|comp| {
            let subject = subjects
                .iter()
                .map(|s| &s.identity)
                .filter(|i| comp.contains(&i.canonical_id()))
                .min()
                .cloned()
                .unwrap_or_else(ExtensionIdentity::unknown);
            Finding::new(RuleId::GraphCycle, &subject, comp.join(" <-> ")).with_meta("size", comp.len().to_string())
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSet {
    pub paths: Vec<Vec<String>>,
    /// Set when enumeration stopped at the cap; `count` is then a lower bound.
    pub truncated: bool,
    pub count: u64,
}

/// All simple directed paths with at least `min_length` nodes, sorted.
/// Stops once more than `cap` paths have been found.
pub fn chains(graph: &InstallGraph, min_length: usize, cap: u64) -> ChainSet {
    enumerate(graph, min_length, cap, true)
}

/// Number of chains [`chains`] would return, without materializing them.
pub fn count_chains(graph: &InstallGraph, min_length: usize, cap: u64) -> (u64, bool) {
    let c = enumerate(graph, min_length, cap, false);
    (c.count, c.truncated)
}

fn enumerate(graph: &InstallGraph, min_length: usize, cap: u64, keep: bool) -> ChainSet {
    let adj = graph.adjacency();
    let mut out = ChainSet::default();
    let mut path: Vec<&str> = Vec::new();
    let mut on_path: BTreeSet<&str> = BTreeSet::new();

    fn walk<'a>(
        v: &'a str,
        adj: &BTreeMap<&'a str, Vec<&'a str>>,
        min_length: usize,
        cap: u64,
        keep: bool,
        path: &mut Vec<&'a str>,
        on_path: &mut BTreeSet<&'a str>,
        out: &mut ChainSet,
    ) {
        if out.truncated {
            return;
        }
        path.push(v);
        on_path.insert(v);
        if path.len() >= min_length {
            if out.count >= cap {
                out.truncated = true;
                out.count += 1;
            } else {
                out.count += 1;
                if keep {
                    out.paths.push(path.iter().map(|s| s.to_string()).collect());
                }
            }
        }
        for &w in &adj[v] {
            if !on_path.contains(w) {
                walk(w, adj, min_length, cap, keep, path, on_path, out);
            }
        }
        on_path.remove(v);
        path.pop();
    }

    for &start in adj.keys() {
        walk(start, &adj, min_length, cap, keep, &mut path, &mut on_path, &mut out);
        if out.truncated {
            break;
        }
    }
    out.paths.sort();
    out
}

/// Table-4 style counts over installed extensions (in-degree at least one).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossFlagReport {
    /// Extensions with at least one outgoing install edge.
    pub installer_counts: u64,
    /// Extensions with at least one incoming install edge.
    pub installed_counts: u64,
    /// Distinct extensions lying on a chain of three or more.
    pub chain_count: u64,
    pub chain_paths: u64,
    pub chains_truncated: bool,
    pub installed_targets_with_network: u64,
    pub installed_targets_vt_positive: u64,
    pub installed_targets_with_cve: u64,
}

impl CrossFlagReport {
    /// Rows of the silent-installation table.
    pub fn rows(&self) -> Vec<(&'static str, u64)> {
        vec![
            ("Extensions that are installing other extensions", self.installer_counts),
            ("Extensions that are installed by other extensions", self.installed_counts),
            ("Chain extensions (E1 -> E2 -> E3)", self.chain_count),
            ("With external connections (installed-by cases)", self.installed_targets_with_network),
            ("VT positive cases (installed-by cases)", self.installed_targets_vt_positive),
            ("CVE positive cases (installed-by cases)", self.installed_targets_with_cve),
        ]
    }
}

/// Extensions lying on at least one chain of three or more extensions.
///
/// A node is on such a path exactly when it is the middle of `u -> v -> w`
/// with `u != w`, or an end of a two-edge path `v -> a -> b` or
/// `a -> b -> v` that does not return to it.
pub fn chain_members(graph: &InstallGraph) -> BTreeSet<String> {
    let adj = graph.adjacency();
    let mut preds: BTreeMap<&str, Vec<&str>> = adj.keys().map(|k| (*k, Vec::new())).collect();
    for (from, tos) in &adj {
        for to in tos {
            preds.get_mut(to).expect("edge endpoints are nodes").push(from);
        }
    }
    let mut out = BTreeSet::new();
    for (&v, succ) in &adj {
        let middle = preds[v].iter().any(|u| succ.iter().any(|w| u != w));
        if middle {
            out.insert(v);
            for u in &preds[v] {
                if succ.iter().any(|w| w != u) {
                    out.insert(u);
                }
            }
            for w in succ {
                if preds[v].iter().any(|u| u != w) {
                    out.insert(w);
                }
            }
        }
    }
    out.into_iter().map(str::to_string).collect()
}

pub fn cross_flags(graph: &InstallGraph) -> CrossFlagReport {
    cross_flags_with_cap(graph, DEFAULT_PATH_CAP)
}

pub fn cross_flags_with_cap(graph: &InstallGraph, cap: u64) -> CrossFlagReport {
    let installers: BTreeSet<&str> = graph.edges.iter().map(|e| e.from.as_str()).collect();
    let installed: BTreeSet<&str> = graph.edges.iter().map(|e| e.to.as_str()).collect();
    let count = |pred: fn(&NodeAttributes) -> bool| installed.iter().filter(|id| pred(&graph.nodes[**id])).count() as u64;
    let (paths, truncated) = count_chains(graph, DEFAULT_MIN_CHAIN, cap);
    CrossFlagReport {
        installer_counts: installers.len() as u64,
        installed_counts: installed.len() as u64,
        chain_count: chain_members(graph).len() as u64,
        chain_paths: paths,
        chains_truncated: truncated,
        installed_targets_with_network: count(|a| a.has_network),
        installed_targets_vt_positive: count(|a| a.vt_malicious),
        installed_targets_with_cve: count(|a| a.has_cve),
    }
}
